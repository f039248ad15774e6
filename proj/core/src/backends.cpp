#include "sigma/backends.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "httplib.h"
#include "json.hpp"

#include "sigma/protocol.hpp"

namespace sigma::backends {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Prompt header
// ---------------------------------------------------------------------------

std::string prompt_header(AgentRole role, int step) {
    std::ostringstream os;
    os << "«" << "role=" << to_string(role) << " step=" << step << "»\n";
    return os.str();
}

std::string hypo_prompt_header(AgentRole role, int ordinal) {
    std::ostringstream os;
    os << "«" << "role=" << to_string(role) << " step=0 kind=hypo ordinal="
       << ordinal << "»\n";
    return os.str();
}

std::optional<PromptKey> parse_prompt_header(std::string_view prompt) {
    static const std::string open = "«";
    static const std::string close = "»";
    if (prompt.substr(0, open.size()) != open) return std::nullopt;
    const size_t end = prompt.find(close);
    if (end == std::string_view::npos) return std::nullopt;
    const std::string body(prompt.substr(open.size(), end - open.size()));

    PromptKey key;
    bool saw_role = false, saw_step = false;
    std::istringstream fields(body);
    std::string field;
    while (fields >> field) {
        const size_t eq = field.find('=');
        if (eq == std::string::npos) return std::nullopt;
        const std::string name = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        try {
            if (name == "role") {
                key.role = role_from_string(value);
                saw_role = true;
            } else if (name == "step") {
                key.step = std::stoi(value);
                saw_step = true;
            } else if (name == "kind") {
                key.hypothetical = value == "hypo";
            } else if (name == "ordinal") {
                key.ordinal = std::stoi(value);
            }
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }
    if (!saw_role || !saw_step) return std::nullopt;
    return key;
}

// ---------------------------------------------------------------------------
// Scripted model
// ---------------------------------------------------------------------------

std::string ScriptedModelBackend::generate(const GenerationRequest& req) {
    const auto key = parse_prompt_header(req.prompt);
    if (!key) return playbook_.default_text;
    if (key->hypothetical) {
        const auto it = playbook_.hypo_entries.find({key->role, key->ordinal});
        return it != playbook_.hypo_entries.end() ? it->second
                                                  : playbook_.hypo_default;
    }
    const auto it = playbook_.entries.find({key->role, key->step});
    return it != playbook_.entries.end() ? it->second : playbook_.default_text;
}

// ---------------------------------------------------------------------------
// Hash embedder
// ---------------------------------------------------------------------------

HashEmbeddingBackend::HashEmbeddingBackend(int dim) : dim_(dim) {
    if (dim_ < 1) throw Error(ErrorKind::InvalidBudget, "embedder dimension must be >= 1");
}

std::uint64_t HashEmbeddingBackend::fnv1a64(std::string_view term) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : term) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<EmbeddingVector> HashEmbeddingBackend::embed_batch(
    const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const std::string& text : texts) {
        std::vector<double> buckets(static_cast<size_t>(dim_), 0.0);
        std::string term;
        bool any = false;
        auto flush = [&] {
            if (term.empty()) return;
            buckets[fnv1a64(term) % static_cast<std::uint64_t>(dim_)] += 1.0;
            any = true;
            term.clear();
        };
        for (char raw : text) {
            const auto c = static_cast<unsigned char>(raw);
            if (std::isalnum(c)) {
                term.push_back(static_cast<char>(std::tolower(c)));
            } else {
                flush();
            }
        }
        flush();
        if (!any) {
            std::fprintf(stderr,
                         "[sigma] warning: text produced no tokens, embedding as "
                         "unit basis vector\n");
            buckets[0] = 1.0;
        } else {
            double norm = 0.0;
            for (double v : buckets) norm += v * v;
            norm = std::sqrt(norm);
            for (double& v : buckets) v /= norm;
        }
        out.push_back(EmbeddingVector{std::move(buckets)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Caching embedder
// ---------------------------------------------------------------------------

struct CachingEmbedder::Impl {
    std::shared_ptr<EmbeddingBackend> inner;
    std::mutex mu;
    std::unordered_map<std::string, EmbeddingVector> cache;
};

CachingEmbedder::CachingEmbedder(std::shared_ptr<EmbeddingBackend> inner)
    : impl_(std::make_unique<Impl>()) {
    impl_->inner = std::move(inner);
}

CachingEmbedder::~CachingEmbedder() = default;

int CachingEmbedder::dimension() const { return impl_->inner->dimension(); }

std::vector<EmbeddingVector> CachingEmbedder::embed_batch(
    const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<size_t> miss_at;
    std::vector<std::string> misses;
    {
        std::lock_guard<std::mutex> lock(impl_->mu);
        for (size_t i = 0; i < texts.size(); ++i) {
            const auto it = impl_->cache.find(texts[i]);
            if (it != impl_->cache.end()) {
                out[i] = it->second;
            } else {
                miss_at.push_back(i);
                misses.push_back(texts[i]);
            }
        }
    }
    if (!misses.empty()) {
        std::vector<EmbeddingVector> fresh = impl_->inner->embed_batch(misses);
        std::lock_guard<std::mutex> lock(impl_->mu);
        for (size_t j = 0; j < miss_at.size(); ++j) {
            impl_->cache[misses[j]] = fresh[j];
            out[miss_at[j]] = std::move(fresh[j]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Local corpus search
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> distinct_terms(const std::string& text) {
    std::set<std::string> terms;
    std::istringstream words(protocol::lower_ascii(text));
    std::string w;
    while (words >> w) terms.insert(w);
    return {terms.begin(), terms.end()};
}

} // namespace

namespace {

std::vector<Chunk> load_corpus(const std::string& corpus_path) {
    std::ifstream in(corpus_path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open corpus file " + corpus_path);
    std::string line;
    int line_no = 0;
    std::vector<Chunk> docs;
    while (std::getline(in, line)) {
        ++line_no;
        if (protocol::trim(line).empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError, corpus_path + " line " +
                                                   std::to_string(line_no) + ": " +
                                                   e.what());
        }
        if (!rec.contains("doc_id") || !rec.contains("text")) {
            throw Error(ErrorKind::ParseError,
                        corpus_path + " line " + std::to_string(line_no) +
                            ": record needs doc_id and text");
        }
        docs.push_back(Chunk{rec["doc_id"].get<std::string>(),
                             rec["text"].get<std::string>(), ChunkSource::LocalCorpus});
    }
    return docs;
}

} // namespace

LocalCorpusSearchBackend::LocalCorpusSearchBackend(const std::string& corpus_path)
    : LocalCorpusSearchBackend(load_corpus(corpus_path)) {}

LocalCorpusSearchBackend::LocalCorpusSearchBackend(std::vector<Chunk> docs)
    : docs_(std::move(docs)) {
    doc_terms_.reserve(docs_.size());
    for (auto& d : docs_) {
        if (d.text.empty())
            throw Error(ErrorKind::ParseError, "corpus chunk " + d.doc_id + " is empty");
        d.source = ChunkSource::LocalCorpus;
        doc_terms_.push_back(distinct_terms(d.text));
    }
}

std::vector<Chunk> LocalCorpusSearchBackend::search(const std::string& query,
                                                    int max_results) {
    const std::vector<std::string> q_terms = distinct_terms(query);
    std::vector<std::pair<int, size_t>> scored; // (overlap, corpus index)
    for (size_t i = 0; i < docs_.size(); ++i) {
        const auto& terms = doc_terms_[i];
        int overlap = 0;
        for (const std::string& t : q_terms) {
            if (std::binary_search(terms.begin(), terms.end(), t)) ++overlap;
        }
        if (overlap > 0) scored.emplace_back(overlap, i);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<Chunk> out;
    const size_t n = std::min<size_t>(scored.size(),
                                      max_results > 0 ? static_cast<size_t>(max_results) : 0);
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) out.push_back(docs_[scored[i].second]);
    return out;
}

// ---------------------------------------------------------------------------
// HTTP backends
// ---------------------------------------------------------------------------

namespace {

struct HttpOptions {
    HttpEndpoint endpoint;
    int retries = 2;
    int backoff_ms = 250;
};

std::string api_key_for(const HttpEndpoint& endpoint) {
    if (endpoint.api_key_env.empty()) return {};
    const char* v = std::getenv(endpoint.api_key_env.c_str());
    return v ? v : "";
}

// One attempt plus `retries` retries with exponential backoff. All failures
// collapse into Error{BackendError} carrying the retry count and last cause.
json post_json(const HttpOptions& opts, const json& body) {
    std::string cause = "unknown";
    for (int attempt = 0; attempt <= opts.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(
                opts.backoff_ms * (1 << (attempt - 1))));
        }
        // Fresh client per call keeps concurrent workers safe.
        httplib::Client client(opts.endpoint.base_url);
        const int t = opts.endpoint.timeout_ms;
        client.set_connection_timeout(t / 1000, (t % 1000) * 1000);
        client.set_read_timeout(t / 1000, (t % 1000) * 1000);
        client.set_write_timeout(t / 1000, (t % 1000) * 1000);
        const std::string key = api_key_for(opts.endpoint);
        httplib::Headers headers;
        if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

        auto res = client.Post(opts.endpoint.path, headers, body.dump(),
                               "application/json");
        if (!res) {
            cause = httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            cause = "HTTP status " + std::to_string(res->status);
            continue;
        }
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            cause = std::string("response is not JSON: ") + e.what();
        }
    }
    throw Error(ErrorKind::BackendError,
                opts.endpoint.base_url + opts.endpoint.path + " failed after " +
                    std::to_string(opts.retries) + " retries: " + cause);
}

class HttpModelBackend : public ModelBackend {
public:
    explicit HttpModelBackend(HttpOptions opts) : opts_(std::move(opts)) {}

    std::string generate(const GenerationRequest& req) override {
        json body = {
            {"model", opts_.endpoint.model_name},
            {"messages", json::array({json{{"role", "user"}, {"content", req.prompt}}})},
            {"stop", req.stop_sequences},
            {"temperature", req.temperature},
            {"seed", req.seed},
            {"max_tokens", req.max_tokens},
        };
        const json res = post_json(opts_, body);
        try {
            const json& choice = res.at("choices").at(0);
            if (choice.contains("message")) {
                return choice["message"].at("content").get<std::string>();
            }
            return choice.at("text").get<std::string>();
        } catch (const json::exception& e) {
            throw Error(ErrorKind::BackendError,
                        std::string("malformed completion response: ") + e.what());
        }
    }

private:
    HttpOptions opts_;
};

class HttpEmbeddingBackend : public EmbeddingBackend {
public:
    HttpEmbeddingBackend(HttpOptions opts, int dimension)
        : opts_(std::move(opts)), dim_(dimension) {}

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
        const json res = post_json(opts_, json{{"inputs", texts}});
        std::vector<EmbeddingVector> out;
        try {
            for (const auto& row : res.at("vectors")) {
                EmbeddingVector v{row.get<std::vector<double>>()};
                if (dim_ == 0) dim_ = v.dimension();
                if (v.dimension() != dim_) {
                    throw Error(ErrorKind::DimensionMismatch,
                                "embedding dimension changed mid-run");
                }
                const bool nonzero = std::any_of(v.values.begin(), v.values.end(),
                                                 [](double x) { return x != 0.0; });
                if (!nonzero) {
                    throw Error(ErrorKind::ZeroVector,
                                "embedding backend returned a zero vector");
                }
                out.push_back(std::move(v));
            }
        } catch (const json::exception& e) {
            throw Error(ErrorKind::BackendError,
                        std::string("malformed embedding response: ") + e.what());
        }
        if (out.size() != texts.size()) {
            throw Error(ErrorKind::BackendError,
                        "embedding response count does not match inputs");
        }
        return out;
    }

    int dimension() const override { return dim_; }

private:
    HttpOptions opts_;
    int dim_;
};

class HttpSearchBackend : public SearchBackend {
public:
    explicit HttpSearchBackend(HttpOptions opts) : opts_(std::move(opts)) {}

    std::vector<Chunk> search(const std::string& query, int max_results) override {
        const json res =
            post_json(opts_, json{{"query", query}, {"max_results", max_results}});
        std::vector<Chunk> out;
        try {
            for (const auto& rec : res.at("results")) {
                out.push_back(Chunk{rec.at("doc_id").get<std::string>(),
                                    rec.at("text").get<std::string>(),
                                    ChunkSource::RemoteSearch});
            }
        } catch (const json::exception& e) {
            throw Error(ErrorKind::BackendError,
                        std::string("malformed search response: ") + e.what());
        }
        return out;
    }

private:
    HttpOptions opts_;
};

} // namespace

std::shared_ptr<ModelBackend> make_http_model(const HttpEndpoint& endpoint,
                                              int retries, int backoff_ms) {
    return std::make_shared<HttpModelBackend>(HttpOptions{endpoint, retries, backoff_ms});
}

std::shared_ptr<EmbeddingBackend> make_http_embedder(const HttpEndpoint& endpoint,
                                                     int dimension, int retries,
                                                     int backoff_ms) {
    return std::make_shared<HttpEmbeddingBackend>(
        HttpOptions{endpoint, retries, backoff_ms}, dimension);
}

std::shared_ptr<SearchBackend> make_http_search(const HttpEndpoint& endpoint,
                                                int retries, int backoff_ms) {
    return std::make_shared<HttpSearchBackend>(HttpOptions{endpoint, retries, backoff_ms});
}

} // namespace sigma::backends
