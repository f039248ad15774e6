#pragma once

#include <string>

#include "sigma/backends.hpp"
#include "sigma/types.hpp"

namespace sigma::config {

/// Parses and validates a JSON run configuration. Relative playbook/corpus
/// paths are resolved against the config file's directory, so a config plus
/// its fixtures form a relocatable bundle. Unknown fields are rejected:
/// a typo'd budget silently falling back to a default is worse than an error.
RunConfig load_config(const std::string& path);

/// {"default": str?, "hypo_default": str?, "entries": [{role, step, text}],
///  "hypo": [{role, ordinal, text}]}
backends::ScriptedPlaybook load_playbook(const std::string& path);

/// Instantiates the backend triple from settings. Base URLs may be overridden
/// via SIGMA_MODEL_BASE_URL, SIGMA_EMBEDDING_BASE_URL, SIGMA_SEARCH_BASE_URL;
/// API keys are read from the configured env var names at call time and are
/// never logged. The embedder is wrapped in a memoizing cache.
backends::BackendSet make_backends(const BackendSettings& settings);

} // namespace sigma::config
