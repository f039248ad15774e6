#include "sigma/config_io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"

#include "sigma/error.hpp"

namespace sigma::config {

using nlohmann::json;

namespace {

json parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open config file: " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& ex) {
        throw Error(ErrorKind::ParseError, path + ": " + ex.what());
    }
}

[[noreturn]] void bad_field(const std::string& where, const std::string& why) {
    throw Error(ErrorKind::ParseError, where + ": " + why);
}

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!known.count(key)) bad_field(where.empty() ? key : where + "." + key,
                                         "unknown field");
    }
}

int get_int(const json& obj, const std::string& key, int fallback,
            const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer()) bad_field(where + key, "expected an integer");
    return obj[key].get<int>();
}

double get_double(const json& obj, const std::string& key, double fallback,
                  const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) bad_field(where + key, "expected a number");
    return obj[key].get<double>();
}

bool get_bool(const json& obj, const std::string& key, bool fallback,
              const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_boolean()) bad_field(where + key, "expected a boolean");
    return obj[key].get<bool>();
}

std::string get_string(const json& obj, const std::string& key,
                       const std::string& fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_string()) bad_field(where + key, "expected a string");
    return obj[key].get<std::string>();
}

std::string resolve_path(const std::string& raw, const std::filesystem::path& base_dir) {
    if (raw.empty()) return raw;
    std::filesystem::path p(raw);
    if (p.is_absolute()) return raw;
    return (base_dir / p).lexically_normal().string();
}

HttpEndpoint parse_endpoint(const json& obj, const HttpEndpoint& defaults,
                            const std::string& where) {
    reject_unknown(obj, {"base_url", "path", "model_name", "timeout_ms", "api_key_env"},
                   where);
    HttpEndpoint ep = defaults;
    ep.base_url = get_string(obj, "base_url", defaults.base_url, where + ".");
    ep.path = get_string(obj, "path", defaults.path, where + ".");
    ep.model_name = get_string(obj, "model_name", defaults.model_name, where + ".");
    ep.timeout_ms = get_int(obj, "timeout_ms", defaults.timeout_ms, where + ".");
    ep.api_key_env = get_string(obj, "api_key_env", defaults.api_key_env, where + ".");
    if (ep.timeout_ms < 1) bad_field(where + ".timeout_ms", "must be >= 1");
    return ep;
}

std::string env_or(const char* name, const std::string& fallback) {
    const char* value = std::getenv(name);
    return value && *value ? value : fallback;
}

} // namespace

RunConfig load_config(const std::string& path) {
    const json root = parse_file(path);
    if (!root.is_object()) throw Error(ErrorKind::ParseError, path + ": not a JSON object");
    const std::filesystem::path base_dir = std::filesystem::path(path).parent_path();

    reject_unknown(root,
                   {"instructions", "max_searches", "max_steps", "top_k",
                    "candidate_pool", "results_limit_chars", "decoding", "priority",
                    "majority_first", "parallelism", "normalized_trace", "backends"},
                   "");

    RunConfig cfg;
    if (!root.contains("instructions") || !root["instructions"].is_object())
        bad_field("instructions", "required object mapping role names to prompts");
    for (const auto& [role_name, prompt] : root["instructions"].items()) {
        AgentRole role;
        try {
            role = role_from_string(role_name);
        } catch (const Error&) {
            bad_field("instructions." + role_name, "unknown role");
        }
        if (!prompt.is_string()) bad_field("instructions." + role_name, "expected a string");
        cfg.instructions.push_back(AgentInstruction{role, prompt.get<std::string>()});
    }

    cfg.max_searches = get_int(root, "max_searches", cfg.max_searches, "");
    cfg.max_steps = get_int(root, "max_steps", cfg.max_steps, "");
    cfg.top_k = get_int(root, "top_k", cfg.top_k, "");
    cfg.candidate_pool = get_int(root, "candidate_pool", cfg.candidate_pool, "");
    cfg.results_limit_chars = get_int(root, "results_limit_chars", cfg.results_limit_chars, "");
    cfg.majority_first = get_bool(root, "majority_first", cfg.majority_first, "");
    cfg.parallelism = get_int(root, "parallelism", cfg.parallelism, "");
    cfg.normalized_trace = get_bool(root, "normalized_trace", cfg.normalized_trace, "");

    if (root.contains("decoding")) {
        const json& dec = root["decoding"];
        if (!dec.is_object()) bad_field("decoding", "expected an object");
        reject_unknown(dec, {"temperature", "seed", "max_tokens", "stop_sequences"},
                       "decoding");
        cfg.decoding.temperature =
            get_double(dec, "temperature", cfg.decoding.temperature, "decoding.");
        if (dec.contains("seed")) {
            if (!dec["seed"].is_number_integer()) bad_field("decoding.seed", "expected an integer");
            cfg.decoding.seed = dec["seed"].get<std::int64_t>();
        }
        cfg.decoding.max_tokens =
            get_int(dec, "max_tokens", cfg.decoding.max_tokens, "decoding.");
        if (dec.contains("stop_sequences")) {
            if (!dec["stop_sequences"].is_array())
                bad_field("decoding.stop_sequences", "expected an array of strings");
            cfg.decoding.stop_sequences.clear();
            for (const json& s : dec["stop_sequences"]) {
                if (!s.is_string())
                    bad_field("decoding.stop_sequences", "expected an array of strings");
                cfg.decoding.stop_sequences.push_back(s.get<std::string>());
            }
        }
    }

    if (root.contains("priority")) {
        if (!root["priority"].is_array()) bad_field("priority", "expected an array of role names");
        cfg.priority.clear();
        for (const json& r : root["priority"]) {
            if (!r.is_string()) bad_field("priority", "expected an array of role names");
            try {
                cfg.priority.push_back(role_from_string(r.get<std::string>()));
            } catch (const Error&) {
                bad_field("priority", "unknown role '" + r.get<std::string>() + "'");
            }
        }
    }

    if (root.contains("backends")) {
        const json& bk = root["backends"];
        if (!bk.is_object()) bad_field("backends", "expected an object");
        reject_unknown(bk,
                       {"kind", "playbook", "corpus", "embedding_kind", "search_kind",
                        "model", "embedding", "search", "retries", "retry_backoff_ms",
                        "embedding_dimension"},
                       "backends");
        const std::string kind = get_string(bk, "kind", "scripted", "backends.");
        if (kind == "scripted") cfg.backends.kind = BackendKind::Scripted;
        else if (kind == "http") cfg.backends.kind = BackendKind::Http;
        else bad_field("backends.kind", "expected 'scripted' or 'http'");

        cfg.backends.playbook_path =
            resolve_path(get_string(bk, "playbook", "", "backends."), base_dir);
        cfg.backends.corpus_path =
            resolve_path(get_string(bk, "corpus", "", "backends."), base_dir);
        cfg.backends.embedding_kind =
            get_string(bk, "embedding_kind", cfg.backends.embedding_kind, "backends.");
        cfg.backends.search_kind =
            get_string(bk, "search_kind", cfg.backends.search_kind, "backends.");
        if (cfg.backends.embedding_kind != "hash" && cfg.backends.embedding_kind != "http")
            bad_field("backends.embedding_kind", "expected 'hash' or 'http'");
        if (cfg.backends.search_kind != "local" && cfg.backends.search_kind != "http")
            bad_field("backends.search_kind", "expected 'local' or 'http'");
        cfg.backends.retries = get_int(bk, "retries", cfg.backends.retries, "backends.");
        cfg.backends.retry_backoff_ms =
            get_int(bk, "retry_backoff_ms", cfg.backends.retry_backoff_ms, "backends.");
        cfg.backends.embedding_dimension =
            get_int(bk, "embedding_dimension", cfg.backends.embedding_dimension, "backends.");
        if (cfg.backends.embedding_dimension < 1)
            bad_field("backends.embedding_dimension", "must be >= 1");
        if (cfg.backends.retry_backoff_ms < 0)
            bad_field("backends.retry_backoff_ms", "must be >= 0");
        if (bk.contains("model"))
            cfg.backends.model = parse_endpoint(bk["model"], cfg.backends.model,
                                                "backends.model");
        if (bk.contains("embedding"))
            cfg.backends.embedding = parse_endpoint(bk["embedding"], cfg.backends.embedding,
                                                    "backends.embedding");
        if (bk.contains("search"))
            cfg.backends.search = parse_endpoint(bk["search"], cfg.backends.search,
                                                 "backends.search");
    }

    validate_config(cfg);

    if (cfg.backends.kind == BackendKind::Scripted && cfg.backends.playbook_path.empty())
        bad_field("backends.playbook", "required when backends.kind is 'scripted'");
    if (cfg.backends.search_kind == "local" && cfg.backends.corpus_path.empty())
        bad_field("backends.corpus", "required when backends.search_kind is 'local'");
    if (cfg.backends.kind == BackendKind::Http && cfg.backends.model.base_url.empty() &&
        !std::getenv("SIGMA_MODEL_BASE_URL"))
        bad_field("backends.model.base_url", "required when backends.kind is 'http'");

    return cfg;
}

backends::ScriptedPlaybook load_playbook(const std::string& path) {
    const json root = parse_file(path);
    if (!root.is_object()) throw Error(ErrorKind::ParseError, path + ": not a JSON object");
    reject_unknown(root, {"default", "hypo_default", "entries", "hypo"}, "");

    backends::ScriptedPlaybook pb;
    pb.default_text = get_string(root, "default", pb.default_text, "");
    pb.hypo_default = get_string(root, "hypo_default", pb.hypo_default, "");

    auto load_entries = [&](const char* key, bool hypo) {
        if (!root.contains(key)) return;
        if (!root[key].is_array()) bad_field(key, "expected an array");
        int index = 0;
        for (const json& e : root[key]) {
            const std::string where = std::string(key) + "[" + std::to_string(index++) + "]";
            if (!e.is_object()) bad_field(where, "expected an object");
            reject_unknown(e, hypo ? std::set<std::string>{"role", "ordinal", "text"}
                                   : std::set<std::string>{"role", "step", "text"},
                           where);
            if (!e.contains("role") || !e["role"].is_string())
                bad_field(where + ".role", "required string");
            AgentRole role;
            try {
                role = role_from_string(e["role"].get<std::string>());
            } catch (const Error&) {
                bad_field(where + ".role", "unknown role");
            }
            const char* idx_key = hypo ? "ordinal" : "step";
            if (!e.contains(idx_key) || !e[idx_key].is_number_integer())
                bad_field(where + "." + idx_key, "required integer");
            if (!e.contains("text") || !e["text"].is_string())
                bad_field(where + ".text", "required string");
            auto& target = hypo ? pb.hypo_entries : pb.entries;
            target[{role, e[idx_key].get<int>()}] = e["text"].get<std::string>();
        }
    };
    load_entries("entries", false);
    load_entries("hypo", true);
    return pb;
}

backends::BackendSet make_backends(const BackendSettings& settings) {
    backends::BackendSet set;

    if (settings.kind == BackendKind::Scripted) {
        set.model = std::make_shared<backends::ScriptedModelBackend>(
            load_playbook(settings.playbook_path));
    } else {
        HttpEndpoint ep = settings.model;
        ep.base_url = env_or("SIGMA_MODEL_BASE_URL", ep.base_url);
        set.model = backends::make_http_model(ep, settings.retries, settings.retry_backoff_ms);
    }

    std::shared_ptr<backends::EmbeddingBackend> embedder;
    if (settings.embedding_kind == "http") {
        HttpEndpoint ep = settings.embedding;
        ep.base_url = env_or("SIGMA_EMBEDDING_BASE_URL", ep.base_url);
        embedder = backends::make_http_embedder(ep, settings.embedding_dimension,
                                                settings.retries, settings.retry_backoff_ms);
    } else {
        embedder = std::make_shared<backends::HashEmbeddingBackend>(
            settings.embedding_dimension);
    }
    set.embedder = std::make_shared<backends::CachingEmbedder>(std::move(embedder));

    if (settings.search_kind == "http") {
        HttpEndpoint ep = settings.search;
        ep.base_url = env_or("SIGMA_SEARCH_BASE_URL", ep.base_url);
        set.search = backends::make_http_search(ep, settings.retries,
                                                settings.retry_backoff_ms);
    } else {
        set.search = std::make_shared<backends::LocalCorpusSearchBackend>(
            settings.corpus_path);
    }
    return set;
}

} // namespace sigma::config
