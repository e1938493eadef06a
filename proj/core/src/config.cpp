#include "progmoe/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "progmoe/csv.hpp"
#include "progmoe/error.hpp"

namespace progmoe {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename Int>
Int parse_integer(const std::string& key, const std::string& text) {
  Int v{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw Error(ErrorKind::InvalidConfig, "key '" + key + "': not an integer: '" + text + "'");
  return v;
}

}  // namespace

KeyValues KeyValues::parse(std::istream& in, const std::string& origin) {
  KeyValues kv;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::ParseError, origin + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorKind::ParseError, origin + ":" + std::to_string(number) + ": empty key");
    if (kv.has(key)) throw Error(ErrorKind::ParseError, origin + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
    kv.values_[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open config '" + path + "'");
  return parse(in, path);
}

void KeyValues::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty()) {
    throw Error(ErrorKind::InvalidConfig, "override '" + assignment + "' is not key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string* KeyValues::lookup(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  const auto* v = lookup(key);
  return v ? *v : fallback;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  const auto* v = lookup(key);
  if (!v) return fallback;
  try {
    return csv::parse_double(*v, key);
  } catch (const Error& e) {
    throw Error(ErrorKind::InvalidConfig, "key '" + key + "': not a number: '" + *v + "'");
  }
}

int KeyValues::get_int(const std::string& key, int fallback) const {
  const auto* v = lookup(key);
  return v ? parse_integer<int>(key, *v) : fallback;
}

std::uint64_t KeyValues::get_uint64(const std::string& key, std::uint64_t fallback) const {
  const auto* v = lookup(key);
  return v ? parse_integer<std::uint64_t>(key, *v) : fallback;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  const auto* v = lookup(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw Error(ErrorKind::InvalidConfig, "key '" + key + "': expected true|false, got '" + *v + "'");
}

std::vector<double> KeyValues::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const auto* v = lookup(key);
  if (!v) return fallback;
  std::vector<double> out;
  if (v->empty()) return out;
  for (const auto& field : csv::split_line(*v)) {
    try {
      out.push_back(csv::parse_double(field, key));
    } catch (const Error&) {
      throw Error(ErrorKind::InvalidConfig, "key '" + key + "': not a number list: '" + *v + "'");
    }
  }
  return out;
}

std::vector<int> KeyValues::get_ints(const std::string& key, const std::vector<int>& fallback) const {
  const auto* v = lookup(key);
  if (!v) return fallback;
  std::vector<int> out;
  if (v->empty()) return out;
  for (const auto& field : csv::split_line(*v)) out.push_back(parse_integer<int>(key, field));
  return out;
}

void KeyValues::require_all_consumed() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) throw Error(ErrorKind::InvalidConfig, "unknown key(s): " + unknown);
}

std::string format_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + csv::format_double(values[i]);
  return out;
}

std::string format_list(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
  return out;
}

// ------------------------------------------------------------ engine config

EngineConfig engine_config_from(const KeyValues& kv) {
  EngineConfig c;
  ModelConfig& m = c.model;
  m.horizon = kv.get_double("model.horizon", m.horizon);
  m.step = kv.get_double("model.step", m.step);
  m.k_init = kv.get_double("model.k_init", m.k_init);
  m.alpha_init = kv.get_double("model.alpha_init", m.alpha_init);
  m.learn_v = kv.get_bool("model.learn_v", m.learn_v);
  m.v_init = kv.get_double("model.v_init", m.v_init);
  m.c0_base = kv.get_double("model.c0_base", m.c0_base);
  m.c0_seed = kv.get_double("model.c0_seed", m.c0_seed);
  {
    std::vector<int> seeds;
    for (auto r : m.seed_regions) seeds.push_back(static_cast<int>(r));
    seeds = kv.get_ints("model.seed_regions", seeds);
    m.seed_regions.assign(seeds.begin(), seeds.end());
  }
  m.enable_ignd = kv.get_bool("model.enable_ignd", m.enable_ignd);
  m.enable_local = kv.get_bool("model.enable_local", m.enable_local);

  m.ignd.latent_dim = kv.get_int("ignd.latent_dim", m.ignd.latent_dim);
  m.ignd.encoder_layers = kv.get_ints("ignd.encoder_layers", m.ignd.encoder_layers);
  m.ignd.prop_hidden = kv.get_int("ignd.prop_hidden", m.ignd.prop_hidden);
  m.ignd.message_dim = kv.get_int("ignd.message_dim", m.ignd.message_dim);
  m.ignd.decoder_hidden = kv.get_int("ignd.decoder_hidden", m.ignd.decoder_hidden);
  {
    const std::string enc = kv.get_string("ignd.time_encoding", "none");
    if (enc == "none") {
      m.ignd.time_encoding = TimeEncoding::None;
    } else if (enc == "scalar") {
      m.ignd.time_encoding = TimeEncoding::ScalarAppend;
    } else {
      throw Error(ErrorKind::InvalidConfig, "ignd.time_encoding must be none|scalar");
    }
  }
  m.ignd.mask_to_support = kv.get_bool("ignd.mask_to_support", m.ignd.mask_to_support);

  m.local.hidden_widths = kv.get_ints("local.hidden", m.local.hidden_widths);
  m.local.activation = nn::parse_activation(kv.get_string("local.activation", nn::to_string(m.local.activation)));
  m.local.time_input = kv.get_bool("local.time_input", m.local.time_input);

  m.gate.hidden = kv.get_int("gate.hidden", m.gate.hidden);
  {
    const auto bias = kv.get_doubles("gate.init_bias", {m.gate.init_bias[0], m.gate.init_bias[1], m.gate.init_bias[2]});
    if (bias.size() != 3) throw Error(ErrorKind::InvalidConfig, "gate.init_bias needs exactly 3 values");
    m.gate.init_bias = Eigen::Vector3d(bias[0], bias[1], bias[2]);
  }
  m.gate.mode = parse_gate_mode(kv.get_string("gate.mode", to_string(m.gate.mode)));

  TrainConfig& t = c.train;
  t.lambda1 = kv.get_double("train.lambda1", t.lambda1);
  t.lambda2 = kv.get_double("train.lambda2", t.lambda2);
  t.learning_rate = kv.get_double("train.learning_rate", t.learning_rate);
  t.adam_beta1 = kv.get_double("train.adam_beta1", t.adam_beta1);
  t.adam_beta2 = kv.get_double("train.adam_beta2", t.adam_beta2);
  t.adam_eps = kv.get_double("train.adam_eps", t.adam_eps);
  t.inner_epochs = kv.get_int("train.inner_epochs", t.inner_epochs);
  t.max_outer_iters = kv.get_int("train.max_outer_iters", t.max_outer_iters);
  t.convergence_tol = kv.get_double("train.convergence_tol", t.convergence_tol);
  t.patience = kv.get_int("train.patience", t.patience);
  t.seed = kv.get_uint64("train.seed", t.seed);
  t.val_size = kv.get_int("train.val_size", t.val_size);
  t.test_size = kv.get_int("train.test_size", t.test_size);
  t.ortho_points = parse_ortho_points(kv.get_string("train.ortho_points", to_string(t.ortho_points)));
  t.freeze_mechanistic = kv.get_bool("train.freeze_mechanistic", t.freeze_mechanistic);
  t.threads = kv.get_int("train.threads", t.threads);
  t.deterministic = kv.get_bool("train.deterministic", t.deterministic);
  t.error_map_bins = kv.get_int("eval.bins", t.error_map_bins);

  kv.require_all_consumed();
  t.validate();
  return c;
}

EngineConfig load_engine_config(const std::string& path) { return engine_config_from(KeyValues::load(path)); }

std::string dump(const EngineConfig& c) {
  const ModelConfig& m = c.model;
  const TrainConfig& t = c.train;
  auto d = [](double v) { return csv::format_double(v); };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  std::vector<int> seeds;
  for (auto r : m.seed_regions) seeds.push_back(static_cast<int>(r));

  std::ostringstream os;
  os << "# model\n"
     << "model.horizon = " << d(m.horizon) << "\n"
     << "model.step = " << d(m.step) << "\n"
     << "model.k_init = " << d(m.k_init) << "\n"
     << "model.alpha_init = " << d(m.alpha_init) << "\n"
     << "model.learn_v = " << b(m.learn_v) << "\n"
     << "model.v_init = " << d(m.v_init) << "  # used only with learn_v\n"
     << "model.c0_base = " << d(m.c0_base) << "\n"
     << "model.c0_seed = " << d(m.c0_seed) << "\n"
     << "model.seed_regions = " << format_list(seeds) << "\n"
     << "model.enable_ignd = " << b(m.enable_ignd) << "\n"
     << "model.enable_local = " << b(m.enable_local) << "\n"
     << "\n# graph diffusion expert\n"
     << "ignd.latent_dim = " << m.ignd.latent_dim << "\n"
     << "ignd.encoder_layers = " << format_list(m.ignd.encoder_layers) << "\n"
     << "ignd.prop_hidden = " << m.ignd.prop_hidden << "\n"
     << "ignd.message_dim = " << m.ignd.message_dim << "\n"
     << "ignd.decoder_hidden = " << m.ignd.decoder_hidden << "\n"
     << "ignd.time_encoding = " << (m.ignd.time_encoding == TimeEncoding::None ? "none" : "scalar") << "  # none|scalar\n"
     << "ignd.mask_to_support = " << b(m.ignd.mask_to_support) << "\n"
     << "\n# local reaction expert\n"
     << "local.hidden = " << format_list(m.local.hidden_widths) << "\n"
     << "local.activation = " << nn::to_string(m.local.activation) << "  # tanh|softplus\n"
     << "local.time_input = " << b(m.local.time_input) << "\n"
     << "\n# gate\n"
     << "gate.hidden = " << m.gate.hidden << "\n"
     << "gate.init_bias = " << format_list(std::vector<double>{m.gate.init_bias[0], m.gate.init_bias[1], m.gate.init_bias[2]}) << "\n"
     << "gate.mode = " << to_string(m.gate.mode) << "  # temporal|constant|mechanistic\n"
     << "\n# training\n"
     << "train.lambda1 = " << d(t.lambda1) << "\n"
     << "train.lambda2 = " << d(t.lambda2) << "\n"
     << "train.learning_rate = " << d(t.learning_rate) << "\n"
     << "train.adam_beta1 = " << d(t.adam_beta1) << "\n"
     << "train.adam_beta2 = " << d(t.adam_beta2) << "\n"
     << "train.adam_eps = " << d(t.adam_eps) << "\n"
     << "train.inner_epochs = " << t.inner_epochs << "\n"
     << "train.max_outer_iters = " << t.max_outer_iters << "\n"
     << "train.convergence_tol = " << d(t.convergence_tol) << "\n"
     << "train.patience = " << t.patience << "\n"
     << "train.seed = " << t.seed << "\n"
     << "train.val_size = " << t.val_size << "\n"
     << "train.test_size = " << t.test_size << "\n"
     << "train.ortho_points = " << to_string(t.ortho_points) << "  # observations|grid\n"
     << "train.freeze_mechanistic = " << b(t.freeze_mechanistic) << "\n"
     << "train.threads = " << t.threads << "\n"
     << "train.deterministic = " << b(t.deterministic) << "\n"
     << "\n# evaluation\n"
     << "eval.bins = " << t.error_map_bins << "\n";
  return os.str();
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const EngineConfig& cfg) { return fnv1a64(dump(cfg)); }

}  // namespace progmoe
