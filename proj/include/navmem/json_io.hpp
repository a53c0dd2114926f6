#pragma once

// nlohmann::json adapters for the structured-text formats.

#include "json.hpp"
#include "navmem/gridworld.hpp"
#include "navmem/models.hpp"

namespace navmem {

void to_json(nlohmann::json& j, const CuldesacSpec& spec);
void from_json(const nlohmann::json& j, CuldesacSpec& spec);

void to_json(nlohmann::json& j, const ModelConfig& config);
void from_json(const nlohmann::json& j, ModelConfig& config);

/// Rejects keys outside `allowed`; `where` names the object in the message.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const char* where);

}  // namespace navmem
