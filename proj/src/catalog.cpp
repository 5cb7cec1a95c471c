#include "refsearch/catalog.hpp"

#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "refsearch/errors.hpp"

namespace refsearch {

using nlohmann::json;

Catalog ingest_catalog(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open catalog: " + path.string());

    Catalog catalog;
    std::unordered_map<std::string, std::size_t> first_line_of_id;
    std::string line;
    std::size_t line_no = 0;
    std::size_t non_empty = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++non_empty;

        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            catalog.issues.push_back({line_no, "not a JSON object"});
            continue;
        }
        if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty()) {
            catalog.issues.push_back({line_no, "missing or empty \"id\""});
            continue;
        }
        if (!j.contains("fields") || !j["fields"].is_object()) {
            catalog.issues.push_back({line_no, "missing \"fields\" object"});
            continue;
        }

        ProductRecord record;
        record.id = j["id"].get<std::string>();
        bool bad_field = false;
        for (const auto& [name, value] : j["fields"].items()) {
            if (value.is_null()) continue;  // explicit null counts as missing
            if (!value.is_string()) {
                catalog.issues.push_back({line_no, "field \"" + name + "\" is not a string"});
                bad_field = true;
                break;
            }
            record.fields[name] = value.get<std::string>();
        }
        if (bad_field) continue;

        auto [it, inserted] = first_line_of_id.emplace(record.id, line_no);
        if (!inserted) {
            throw ParseError("duplicate product id \"" + record.id + "\" on lines " +
                             std::to_string(it->second) + " and " + std::to_string(line_no));
        }
        catalog.records.push_back(std::move(record));
    }

    if (non_empty > 0 &&
        catalog.issues.size() * 10 > non_empty) {  // strictly more than 10% malformed
        throw ParseError("catalog " + path.string() + ": " + std::to_string(catalog.issues.size()) +
                         " of " + std::to_string(non_empty) + " lines malformed (over 10%)");
    }
    return catalog;
}

void write_catalog(const std::filesystem::path& path, const std::vector<ProductRecord>& records) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write catalog: " + path.string());
    for (const auto& record : records) {
        json j;
        j["id"] = record.id;
        json fields = json::object();
        for (const auto& [name, text] : record.fields) fields[name] = text;
        j["fields"] = std::move(fields);
        out << j.dump() << "\n";
    }
}

}  // namespace refsearch
