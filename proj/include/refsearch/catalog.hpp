#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "refsearch/field_vectorizer.hpp"

namespace refsearch {

struct IngestIssue {
    std::size_t line;
    std::string message;
};

struct Catalog {
    std::vector<ProductRecord> records;
    std::vector<IngestIssue> issues;  // malformed lines that were skipped
};

// One JSON object per line with "id" and "fields" keys. Malformed lines
// are collected with their line numbers; more than 10% malformed aborts,
// and duplicate ids abort naming both offending lines.
Catalog ingest_catalog(const std::filesystem::path& path);

void write_catalog(const std::filesystem::path& path, const std::vector<ProductRecord>& records);

}  // namespace refsearch
