#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "refsearch/search_index.hpp"

namespace refsearch {

// Handles one newline-delimited JSON request, returning the response
// line (without the trailing newline). Errors come back as
// {"error": "..."} instead of propagating.
std::string handle_query_line(const Index& index, const SearchConfig& defaults,
                              const std::string& line);

// Newline-delimited JSON over a Unix-domain socket. Connections are
// served concurrently against one immutable index snapshot.
class QueryServer {
public:
    QueryServer(std::shared_ptr<const Index> index, SearchConfig defaults);
    ~QueryServer();

    QueryServer(const QueryServer&) = delete;
    QueryServer& operator=(const QueryServer&) = delete;

    void start(const std::filesystem::path& socket_path);
    void stop();
    bool running() const { return running_.load(); }

private:
    void accept_loop();
    void serve_connection(int fd);

    std::shared_ptr<const Index> index_;
    SearchConfig defaults_;
    std::filesystem::path socket_path_;
    int listen_fd_ = -1;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::vector<std::thread> workers_;
    std::mutex client_mutex_;
    std::vector<int> client_fds_;
};

}  // namespace refsearch
