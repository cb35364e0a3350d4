#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "litfield/corpus.hpp"
#include "litfield/error.hpp"

namespace litfield {

// Source of raw bibliographic payloads (JSON text, one paper each).
class Provider {
public:
    virtual ~Provider() = default;

    virtual std::string id() const = 0;

    // Candidate ids for a query; the empty query means "everything reachable".
    virtual std::vector<std::string> list_ids(const std::string& query) = 0;

    // Ids adjacent to `frontier` in the citation graph. Providers without graph
    // information return every id they know.
    virtual std::vector<std::string> neighbor_ids(std::span<const std::string> frontier) {
        (void)frontier;
        return list_ids("");
    }

    // Payloads for `ids`, same order. Unknown ids throw NotFound.
    virtual std::vector<std::string> fetch_page(std::span<const std::string> ids) = 0;
};

// Directory of `<id>.json` payloads.
class FixtureProvider : public Provider {
public:
    explicit FixtureProvider(std::filesystem::path dir) : dir_(std::move(dir)) {
        if (!std::filesystem::is_directory(dir_)) throw NotFound("fixture directory " + dir_.string());
    }

    std::string id() const override { return "fixture:" + dir_.generic_string(); }

    std::vector<std::string> list_ids(const std::string& query) override {
        std::vector<std::string> ids;
        for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
            if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
            auto stem = entry.path().stem().string();
            if (query.empty() || stem.find(query) != std::string::npos) ids.push_back(std::move(stem));
        }
        std::sort(ids.begin(), ids.end());
        return ids;
    }

    std::vector<std::string> fetch_page(std::span<const std::string> ids) override {
        std::vector<std::string> out;
        out.reserve(ids.size());
        for (const auto& id : ids) {
            std::ifstream in(dir_ / (id + ".json"), std::ios::binary);
            if (!in) throw NotFound("fixture payload '" + id + "'");
            std::ostringstream buf;
            buf << in.rdbuf();
            out.push_back(buf.str());
        }
        return out;
    }

private:
    std::filesystem::path dir_;
};

// Serves an already-ingested store back as payloads. Expansion over an
// ingested pool uses this, so it never touches the network.
class StoreProvider : public Provider {
public:
    explicit StoreProvider(const CorpusStore& store) : store_(store) {}

    std::string id() const override { return "store"; }

    std::vector<std::string> list_ids(const std::string& query) override {
        std::vector<std::string> ids;
        for (auto& id : store_.ids())
            if (query.empty() || id.find(query) != std::string::npos) ids.push_back(id);
        return ids;
    }

    std::vector<std::string> fetch_page(std::span<const std::string> ids) override {
        std::vector<std::string> out;
        out.reserve(ids.size());
        for (const auto& id : ids) {
            const auto* r = store_.find(id);
            if (!r) throw NotFound("record '" + id + "'");
            json j;
            j["paperId"] = r->id;
            j["abstract"] = r->abstract_text;
            j["publicationDate"] = r->publication_date.iso();
            j["fieldsOfStudy"] = json::array({r->field_label});
            j["citationCount"] = r->citation_count;
            j["referenceCount"] = r->reference_count;
            out.push_back(j.dump());
        }
        return out;
    }

private:
    const CorpusStore& store_;
};

struct HttpResponse {
    int status = 0;  // 0 = no response (connection failure)
    std::string body;
    std::map<std::string, std::string> headers;
};

// Minimal HTTP surface the live provider needs; swapped for a fake in tests.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse get(const std::string& path, const std::map<std::string, std::string>& headers) = 0;
    virtual HttpResponse post(const std::string& path, const std::string& body,
                              const std::map<std::string, std::string>& headers) = 0;
};

using Clock = std::function<std::chrono::steady_clock::time_point()>;
using Sleeper = std::function<void(std::chrono::nanoseconds)>;

inline Clock steady_clock_now() {
    return [] { return std::chrono::steady_clock::now(); };
}
inline Sleeper thread_sleeper() {
    return [](std::chrono::nanoseconds d) { std::this_thread::sleep_for(d); };
}

// Spaces request starts at least 1/requests_per_second apart, across threads.
class RateLimiter {
public:
    RateLimiter(double requests_per_second, Clock clock = steady_clock_now(), Sleeper sleep = thread_sleeper())
        : interval_(std::chrono::duration_cast<std::chrono::nanoseconds>(
              std::chrono::duration<double>(1.0 / requests_per_second))),
          clock_(std::move(clock)),
          sleep_(std::move(sleep)) {
        if (!(requests_per_second > 0)) throw ConfigError("requests_per_second must be positive");
    }

    void acquire() {
        std::chrono::nanoseconds wait{0};
        {
            std::lock_guard lock(mutex_);
            const auto now = clock_();
            const auto slot = started_ ? std::max(now, next_) : now;
            started_ = true;
            next_ = slot + interval_;
            wait = std::chrono::duration_cast<std::chrono::nanoseconds>(slot - now);
        }
        if (wait.count() > 0) sleep_(wait);
    }

    std::chrono::nanoseconds interval() const { return interval_; }

private:
    std::chrono::nanoseconds interval_;
    Clock clock_;
    Sleeper sleep_;
    std::mutex mutex_;
    std::chrono::steady_clock::time_point next_{};
    bool started_ = false;
};

struct LiveOptions {
    std::string api_key;             // from LITFIELD_API_KEY
    double requests_per_second = 1;  // config `requests_per_second`
    int max_retries = 5;             // on HTTP 429
    std::chrono::milliseconds initial_backoff{1000};
    std::size_t search_limit = 1000;  // cap on ids returned by list_ids
    std::string fields = "paperId,abstract,publicationDate,year,fieldsOfStudy,citationCount,referenceCount";
};

// Semantic Scholar graph API client. Paths are relative to the transport's base URL.
class LiveProvider : public Provider {
public:
    LiveProvider(Transport& transport, LiveOptions options, Clock clock = steady_clock_now(),
                 Sleeper sleep = thread_sleeper())
        : transport_(transport),
          options_(std::move(options)),
          limiter_(options_.requests_per_second, clock, sleep),
          sleep_(std::move(sleep)) {}

    std::string id() const override { return "semanticscholar"; }

    std::vector<std::string> list_ids(const std::string& query) override {
        std::vector<std::string> ids;
        std::size_t offset = 0;
        while (ids.size() < options_.search_limit) {
            const std::size_t limit = std::min<std::size_t>(100, options_.search_limit - ids.size());
            auto body = request_json([&] {
                return transport_.get("/graph/v1/paper/search?query=" + url_encode(query) +
                                          "&offset=" + std::to_string(offset) + "&limit=" + std::to_string(limit) +
                                          "&fields=paperId",
                                      headers());
            });
            const auto& data = body.value("data", json::array());
            for (const auto& p : data)
                if (p.contains("paperId") && p["paperId"].is_string()) ids.push_back(p["paperId"]);
            if (data.empty() || !body.contains("next")) break;
            offset = body["next"].get<std::size_t>();
        }
        return ids;
    }

    std::vector<std::string> neighbor_ids(std::span<const std::string> frontier) override {
        std::vector<std::string> out;
        for (const auto& pid : frontier) {
            for (const char* rel : {"references", "citations"}) {
                auto body = request_json([&] {
                    return transport_.get("/graph/v1/paper/" + pid + "/" + rel + "?fields=paperId&limit=1000",
                                          headers());
                });
                const char* key = std::string_view(rel) == "references" ? "citedPaper" : "citingPaper";
                for (const auto& e : body.value("data", json::array())) {
                    if (e.contains(key) && e[key].contains("paperId") && e[key]["paperId"].is_string())
                        out.push_back(e[key]["paperId"]);
                }
            }
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    std::vector<std::string> fetch_page(std::span<const std::string> ids) override {
        json req;
        req["ids"] = std::vector<std::string>(ids.begin(), ids.end());
        auto body = request_json([&] {
            return transport_.post("/graph/v1/paper/batch?fields=" + options_.fields, req.dump(), headers());
        });
        if (!body.is_array() || body.size() != ids.size())
            throw TransportError("batch response does not match request size");
        std::vector<std::string> out;
        out.reserve(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (body[i].is_null()) throw NotFound("paper '" + ids[i] + "'");
            out.push_back(body[i].dump());
        }
        return out;
    }

private:
    std::map<std::string, std::string> headers() const {
        std::map<std::string, std::string> h;
        if (!options_.api_key.empty()) h["x-api-key"] = options_.api_key;
        return h;
    }

    template <class Call>
    json request_json(Call&& call) {
        auto delay = options_.initial_backoff;
        for (int attempt = 0;; ++attempt) {
            limiter_.acquire();
            HttpResponse resp = call();
            if (resp.status == 200) return parse_payload(resp.body);
            if (resp.status == 429 && attempt < options_.max_retries) {
                auto wait = std::chrono::duration_cast<std::chrono::nanoseconds>(delay);
                if (auto it = resp.headers.find("Retry-After"); it != resp.headers.end()) {
                    try {
                        wait = std::max(wait, std::chrono::duration_cast<std::chrono::nanoseconds>(
                                                  std::chrono::seconds(std::stol(it->second))));
                    } catch (const std::exception&) {
                    }
                }
                sleep_(wait);
                delay *= 2;
                continue;
            }
            if (resp.status == 404) throw NotFound("provider returned 404");
            if (resp.status == 0) throw TransportError("connection failed");
            throw TransportError("HTTP " + std::to_string(resp.status), resp.status);
        }
    }

    static std::string url_encode(const std::string& s) {
        static constexpr char hex[] = "0123456789ABCDEF";
        std::string out;
        for (unsigned char c : s) {
            if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
                out.push_back(static_cast<char>(c));
            } else {
                out.push_back('%');
                out.push_back(hex[c >> 4]);
                out.push_back(hex[c & 0xF]);
            }
        }
        return out;
    }

    Transport& transport_;
    LiveOptions options_;
    RateLimiter limiter_;
    Sleeper sleep_;
};

struct FetchOptions {
    std::size_t page_size = 100;
    std::size_t max_inflight = 4;
};

// Fetches `ids` in pages of `page_size`, up to `max_inflight` pages concurrently.
// Pages come back in id order regardless of completion order.
inline std::vector<std::vector<std::string>> fetch_batch(Provider& provider, std::span<const std::string> ids,
                                                         FetchOptions opt = {}) {
    if (opt.page_size < 1) throw ConfigError("page_size must be >= 1");
    const std::size_t inflight = std::max<std::size_t>(1, opt.max_inflight);
    const std::size_t pages = (ids.size() + opt.page_size - 1) / opt.page_size;
    std::vector<std::vector<std::string>> out(pages);

    auto page_span = [&](std::size_t p) {
        const std::size_t lo = p * opt.page_size;
        return ids.subspan(lo, std::min(opt.page_size, ids.size() - lo));
    };

    if (inflight == 1) {
        for (std::size_t p = 0; p < pages; ++p) out[p] = provider.fetch_page(page_span(p));
        return out;
    }
    for (std::size_t wave = 0; wave < pages; wave += inflight) {
        std::vector<std::future<std::vector<std::string>>> futures;
        for (std::size_t p = wave; p < std::min(pages, wave + inflight); ++p)
            futures.push_back(std::async(std::launch::async, [&, p] { return provider.fetch_page(page_span(p)); }));
        for (std::size_t i = 0; i < futures.size(); ++i) out[wave + i] = futures[i].get();
    }
    return out;
}

struct IngestResult {
    CorpusStore store;
    RejectionTally tally;
};

// Fetches and validates `ids`, keeping the records that pass all admission criteria.
inline IngestResult ingest(Provider& provider, std::span<const std::string> ids,
                           std::span<const std::string> target_fields, Date retrieved_at, FetchOptions opt = {},
                           json query_params = json::object()) {
    Provenance prov{provider.id(), std::move(query_params)};
    prov.parameters["page_size"] = opt.page_size;
    IngestResult result{CorpusStore(std::move(prov)), {}};
    for (const auto& page : fetch_batch(provider, ids, opt)) {
        for (const auto& text : page) {
            ValidationResult v;
            try {
                v = validate_record(parse_payload(text), target_fields, retrieved_at);
            } catch (const ParseError&) {
                ++result.tally.malformed;
                continue;
            }
            if (auto* rej = std::get_if<Rejection>(&v)) {
                ++result.tally.rejected[to_string(*rej)];
                continue;
            }
            auto& rec = std::get<PublicationRecord>(v);
            if (result.store.contains(rec.id)) {
                ++result.tally.duplicate;
                continue;
            }
            result.store.add(std::move(rec));
            ++result.tally.accepted;
        }
    }
    return result;
}

}  // namespace litfield
