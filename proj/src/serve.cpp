#include "refsearch/serve.hpp"

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cstring>
#include <mutex>

#include <nlohmann/json.hpp>

#include "refsearch/errors.hpp"

namespace refsearch {

using nlohmann::json;

std::string handle_query_line(const Index& index, const SearchConfig& defaults,
                              const std::string& line) {
    json response;
    try {
        json request = json::parse(line);
        if (!request.is_object()) throw ParseError("request must be a JSON object");

        SearchConfig config = defaults;
        if (request.contains("M")) config.candidate_budget = request["M"].get<std::size_t>();
        if (request.contains("K")) config.top_k = request["K"].get<std::size_t>();
        if (request.contains("gamma") && !request["gamma"].is_null())
            config.min_score = request["gamma"].get<double>();

        SearchResult result;
        if (request.contains("embedding")) {
            const auto embedding = request["embedding"].get<std::vector<double>>();
            std::string exclude;
            const std::string* exclude_ptr = nullptr;
            if (request.contains("id")) {
                exclude = request["id"].get<std::string>();
                exclude_ptr = &exclude;
            }
            result = index.search_embedding(embedding, config, exclude_ptr);
        } else if (request.contains("fields")) {
            ProductRecord record;
            if (request.contains("id")) record.id = request["id"].get<std::string>();
            for (const auto& [name, value] : request["fields"].items()) {
                if (value.is_null()) continue;
                record.fields[name] = value.get<std::string>();
            }
            result = index.search(record, config);
        } else if (request.contains("id")) {
            result = index.search_id(request["id"].get<std::string>(), config);
        } else {
            throw ParseError("request needs one of \"id\", \"fields\", or \"embedding\"");
        }

        json hits = json::array();
        for (const auto& hit : result.hits) hits.push_back({{"id", hit.id}, {"score", hit.score}});
        response["results"] = std::move(hits);
        response["candidates_scanned"] = result.candidates_scanned;
        response["buckets_touched"] = result.buckets_touched;
    } catch (const std::exception& e) {
        response = json{{"error", e.what()}};
    }
    return response.dump();
}

QueryServer::QueryServer(std::shared_ptr<const Index> index, SearchConfig defaults)
    : index_(std::move(index)), defaults_(defaults) {}

QueryServer::~QueryServer() { stop(); }

void QueryServer::start(const std::filesystem::path& socket_path) {
    socket_path_ = socket_path;
    std::filesystem::remove(socket_path_);

    listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error("cannot create socket");

    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    const std::string path = socket_path_.string();
    if (path.size() >= sizeof(addr.sun_path)) throw Error("socket path too long: " + path);
    std::strncpy(addr.sun_path, path.c_str(), sizeof(addr.sun_path) - 1);

    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(listen_fd_);
        throw Error("cannot bind socket: " + path);
    }
    if (::listen(listen_fd_, 16) != 0) {
        ::close(listen_fd_);
        throw Error("cannot listen on socket: " + path);
    }
    running_.store(true);
    acceptor_ = std::thread([this] { accept_loop(); });
}

void QueryServer::accept_loop() {
    while (running_.load()) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) break;  // listen socket closed by stop()
        {
            std::lock_guard<std::mutex> lock(client_mutex_);
            client_fds_.push_back(fd);
        }
        workers_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

void QueryServer::serve_connection(int fd) {
    std::string pending;
    char buffer[4096];
    while (true) {
        const ssize_t got = ::read(fd, buffer, sizeof(buffer));
        if (got <= 0) break;
        pending.append(buffer, static_cast<std::size_t>(got));
        std::size_t newline;
        while ((newline = pending.find('\n')) != std::string::npos) {
            const std::string line = pending.substr(0, newline);
            pending.erase(0, newline + 1);
            if (line.empty()) continue;
            const std::string reply = handle_query_line(*index_, defaults_, line) + "\n";
            std::size_t sent = 0;
            while (sent < reply.size()) {
                const ssize_t n = ::write(fd, reply.data() + sent, reply.size() - sent);
                if (n <= 0) break;
                sent += static_cast<std::size_t>(n);
            }
        }
    }
    ::close(fd);
}

void QueryServer::stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    {
        std::lock_guard<std::mutex> lock(client_mutex_);
        for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    if (acceptor_.joinable()) acceptor_.join();
    for (auto& worker : workers_) {
        if (worker.joinable()) worker.join();
    }
    workers_.clear();
    client_fds_.clear();
    std::filesystem::remove(socket_path_);
}

}  // namespace refsearch
