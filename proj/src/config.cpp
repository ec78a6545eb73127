#include "moelab/config.hpp"

#include <fstream>
#include <sstream>

#include "moelab/errors.hpp"

namespace moelab {

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::swiglu: return "swiglu";
    case Activation::squared_relu: return "squared_relu";
  }
  return "?";
}

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::standard: return "standard";
    case Variant::latent_eff: return "latent_eff";
    case Variant::latent_acc: return "latent_acc";
  }
  return "?";
}

Activation parse_activation(std::string_view s) {
  if (s == "swiglu") return Activation::swiglu;
  if (s == "squared_relu") return Activation::squared_relu;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

Variant parse_variant(std::string_view s) {
  if (s == "standard") return Variant::standard;
  if (s == "latent_eff") return Variant::latent_eff;
  if (s == "latent_acc") return Variant::latent_acc;
  throw ConfigError("unknown variant '" + std::string(s) + "'");
}

int matrices_per_expert(Activation a) noexcept { return a == Activation::swiglu ? 3 : 2; }

void MoEConfig::validate() const {
  auto positive = [](std::int64_t v, const char* name) {
    if (v <= 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(layers, "layers");
  positive(hidden_dim, "hidden_dim");
  positive(latent_dim, "latent_dim");
  positive(routed_experts, "routed_experts");
  positive(active_experts, "active_experts");
  positive(intermediate_dim, "intermediate_dim");
  if (shared_experts < 0) throw ConfigError("shared_experts must be non-negative");
  if (latent_dim > hidden_dim) throw ConfigError("latent_dim must not exceed hidden_dim");
  if (is_latent() && hidden_dim % latent_dim != 0)
    throw ConfigError("hidden_dim " + std::to_string(hidden_dim) +
                      " is not a multiple of latent_dim " + std::to_string(latent_dim) +
                      " (alpha must be an integer)");
  if (active_effective() > routed_effective())
    throw ConfigError("active experts (" + std::to_string(active_effective()) +
                      ") exceed routed experts (" + std::to_string(routed_effective()) + ")");
}

std::int64_t MoEConfig::effective_latent_dim() const noexcept {
  return is_latent() ? latent_dim : hidden_dim;
}

std::int64_t MoEConfig::alpha() const noexcept {
  return is_latent() ? hidden_dim / latent_dim : 1;
}

std::int64_t MoEConfig::routed_effective() const noexcept { return alpha() * routed_experts; }

std::int64_t MoEConfig::active_effective() const noexcept {
  return variant == Variant::latent_acc ? alpha() * active_experts : active_experts;
}

MoEConfig MoEConfig::as_variant(Variant v, std::int64_t a) const {
  if (a <= 0 || hidden_dim % a != 0)
    throw ConfigError("alpha " + std::to_string(a) + " does not divide hidden_dim " +
                      std::to_string(hidden_dim));
  MoEConfig out = *this;
  out.variant = v;
  out.latent_dim = v == Variant::standard ? hidden_dim : hidden_dim / a;
  out.validate();
  return out;
}

void to_json(nlohmann::json& j, const MoEConfig& c) {
  j = nlohmann::json{{"layers", c.layers},
                     {"hidden_dim", c.hidden_dim},
                     {"latent_dim", c.latent_dim},
                     {"routed_experts", c.routed_experts},
                     {"active_experts", c.active_experts},
                     {"shared_experts", c.shared_experts},
                     {"intermediate_dim", c.intermediate_dim},
                     {"activation", std::string(to_string(c.activation))},
                     {"variant", std::string(to_string(c.variant))}};
}

void from_json(const nlohmann::json& j, MoEConfig& c) {
  static const char* const kKeys[] = {"layers",         "hidden_dim",     "latent_dim",
                                      "routed_experts", "active_experts", "shared_experts",
                                      "intermediate_dim", "activation",   "variant"};
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const char* key : kKeys)
    if (!j.contains(key)) throw ConfigError(std::string("missing key '") + key + "'");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : kKeys) known = known || key == k;
    if (!known) throw ConfigError("unknown key '" + key + "'");
  }
  auto count = [&](const char* key) -> std::int64_t {
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ConfigError(std::string("'") + key + "' must be an integer");
    return v.get<std::int64_t>();
  };
  auto text = [&](const char* key) -> std::string {
    const auto& v = j.at(key);
    if (!v.is_string()) throw ConfigError(std::string("'") + key + "' must be a string");
    return v.get<std::string>();
  };
  c.layers = count("layers");
  c.hidden_dim = count("hidden_dim");
  c.latent_dim = count("latent_dim");
  c.routed_experts = count("routed_experts");
  c.active_experts = count("active_experts");
  c.shared_experts = count("shared_experts");
  c.intermediate_dim = count("intermediate_dim");
  c.activation = parse_activation(text("activation"));
  c.variant = parse_variant(text("variant"));
}

MoEConfig parse_model_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  auto c = j.get<MoEConfig>();
  c.validate();
  return c;
}

MoEConfig load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model_config(ss.str());
}

namespace {

struct NamedModel {
  const char* name;
  MoEConfig config;
};

// MoE sublayers of the baseline architectures. The hybrid model has 24 MoE
// sublayers out of 52 layers. The Qwen3 entry is the running example of the
// roofline and communication analysis.
const NamedModel kModels[] = {
    {"16BT-2BA", {27, 2048, 2048, 64, 6, 2, 1408, Activation::swiglu, Variant::standard}},
    {"95BT-8BA", {32, 4096, 4096, 128, 6, 2, 2688, Activation::squared_relu, Variant::standard}},
    {"Hybrid-73BT-8BA",
     {24, 4096, 4096, 128, 6, 2, 2688, Activation::squared_relu, Variant::standard}},
    {"Qwen3-235B-A22B", {94, 4096, 4096, 128, 8, 0, 1536, Activation::swiglu, Variant::standard}},
};

}  // namespace

std::vector<std::string> model_fixture_names() {
  std::vector<std::string> names;
  for (const auto& m : kModels) names.emplace_back(m.name);
  return names;
}

MoEConfig model_fixture(std::string_view name) {
  for (const auto& m : kModels)
    if (name == m.name) return m.config;
  throw ConfigError("unknown model fixture '" + std::string(name) + "'");
}

}  // namespace moelab
