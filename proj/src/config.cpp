#include "igdtm/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "igdtm/error.hpp"

namespace igdtm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw ConfigError(key, "cannot parse value '" + text + "'");
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(value)) throw ConfigError(key, "value must be finite");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<double>(key, trim(item)));
  if (out.empty()) throw ConfigError(key, "empty list");
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

using Setter = std::function<void(ModelConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter number_setter(T ModelConfig::*field) {
  return [field](ModelConfig& c, const std::string& key, const std::string& v) { c.*field = parse_number<T>(key, v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"truncation_K", number_setter(&ModelConfig::truncation_K)},
      {"state_dim_N", number_setter(&ModelConfig::state_dim_N)},
      {"w1", number_setter(&ModelConfig::w1)},
      {"Psi1_scale", number_setter(&ModelConfig::Psi1_scale)},
      {"m2", number_setter(&ModelConfig::m2)},
      {"lambda2", number_setter(&ModelConfig::lambda2)},
      {"w2", number_setter(&ModelConfig::w2)},
      {"Psi2", number_setter(&ModelConfig::Psi2)},
      {"m3", number_setter(&ModelConfig::m3)},
      {"lambda3", number_setter(&ModelConfig::lambda3)},
      {"w3", number_setter(&ModelConfig::w3)},
      {"Psi3_scale", number_setter(&ModelConfig::Psi3_scale)},
      {"eta1", number_setter(&ModelConfig::eta1)},
      {"eta2", number_setter(&ModelConfig::eta2)},
      {"sigma_A", number_setter(&ModelConfig::sigma_A)},
      {"sigma_C", number_setter(&ModelConfig::sigma_C)},
      {"beta", number_setter(&ModelConfig::beta)},
      {"gamma1", number_setter(&ModelConfig::gamma1)},
      {"gamma2", number_setter(&ModelConfig::gamma2)},
      {"sigma_singletons",
       [](ModelConfig& c, const std::string& key, const std::string& v) { c.sigma_singletons = parse_list(key, v); }},
      {"max_iters", number_setter(&ModelConfig::max_iters)},
      {"tol_elbo", number_setter(&ModelConfig::tol_elbo)},
      {"tol_labels", number_setter(&ModelConfig::tol_labels)},
      {"prune_threshold", number_setter(&ModelConfig::prune_threshold)},
      {"merge_interval", number_setter(&ModelConfig::merge_interval)},
      {"merge_sweeps", number_setter(&ModelConfig::merge_sweeps)},
      {"seed", number_setter(&ModelConfig::seed)},
      {"label_update_full",
       [](ModelConfig& c, const std::string& key, const std::string& v) { c.label_update_full = parse_bool(key, v); }},
  };
  return table;
}

void require(bool ok, const char* key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

}  // namespace

void ModelConfig::validate() const {
  require(truncation_K >= 1, "truncation_K", "must be a positive integer");
  require(state_dim_N >= 1, "state_dim_N", "must be a positive integer");
  const double n_minus_1 = state_dim_N - 1;
  require(w1 > n_minus_1, "w1", "must exceed state_dim_N - 1");
  require(Psi1_scale > 0, "Psi1_scale", "must be positive");
  require(lambda2 > 0, "lambda2", "must be positive");
  require(w2 > 0, "w2", "must be positive");
  require(Psi2 > 0, "Psi2", "must be positive");
  require(lambda3 > 0, "lambda3", "must be positive");
  require(w3 > n_minus_1, "w3", "must exceed state_dim_N - 1");
  require(Psi3_scale > 0, "Psi3_scale", "must be positive");
  require(eta1 > 0, "eta1", "must be positive");
  require(eta2 > 0, "eta2", "must be positive");
  require(sigma_A > 0, "sigma_A", "must be positive");
  require(sigma_C > 0, "sigma_C", "must be positive");
  require(beta >= 0, "beta", "must be nonnegative");
  require(sigma_singletons.size() <= 1 || sigma_singletons.size() == static_cast<std::size_t>(truncation_K),
          "sigma_singletons", "needs one value or truncation_K values");
  require(max_iters >= 1, "max_iters", "must be a positive integer");
  require(tol_elbo > 0, "tol_elbo", "must be positive");
  require(tol_labels > 0, "tol_labels", "must be positive");
  require(prune_threshold >= 0 && prune_threshold < 1, "prune_threshold", "must lie in [0, 1)");
  require(merge_interval >= 0, "merge_interval", "must be nonnegative");
  require(merge_sweeps >= 1, "merge_sweeps", "must be a positive integer");
}

std::vector<double> ModelConfig::singletons() const {
  if (sigma_singletons.empty()) return std::vector<double>(static_cast<std::size_t>(truncation_K), 0.0);
  if (sigma_singletons.size() == 1)
    return std::vector<double>(static_cast<std::size_t>(truncation_K), sigma_singletons.front());
  return sigma_singletons;
}

ModelConfig parse_config_text(const std::string& text, const std::string& source) {
  ModelConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(line, source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(key, "unknown configuration key");
    if (value.empty()) throw ConfigError(key, "missing value");
    it->second(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

ModelConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open configuration file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

std::string write_config(const ModelConfig& c) {
  std::ostringstream os;
  os << "truncation_K = " << c.truncation_K << '\n'
     << "state_dim_N = " << c.state_dim_N << '\n'
     << "w1 = " << format_double(c.w1) << '\n'
     << "Psi1_scale = " << format_double(c.Psi1_scale) << '\n'
     << "m2 = " << format_double(c.m2) << '\n'
     << "lambda2 = " << format_double(c.lambda2) << '\n'
     << "w2 = " << format_double(c.w2) << '\n'
     << "Psi2 = " << format_double(c.Psi2) << '\n'
     << "m3 = " << format_double(c.m3) << '\n'
     << "lambda3 = " << format_double(c.lambda3) << '\n'
     << "w3 = " << format_double(c.w3) << '\n'
     << "Psi3_scale = " << format_double(c.Psi3_scale) << '\n'
     << "eta1 = " << format_double(c.eta1) << '\n'
     << "eta2 = " << format_double(c.eta2) << '\n'
     << "sigma_A = " << format_double(c.sigma_A) << '\n'
     << "sigma_C = " << format_double(c.sigma_C) << '\n'
     << "beta = " << format_double(c.beta) << '\n'
     << "gamma1 = " << format_double(c.gamma1) << '\n'
     << "gamma2 = " << format_double(c.gamma2) << '\n';
  if (!c.sigma_singletons.empty()) {
    os << "sigma_singletons = ";
    for (std::size_t k = 0; k < c.sigma_singletons.size(); ++k)
      os << (k ? ", " : "") << format_double(c.sigma_singletons[k]);
    os << '\n';
  }
  os << "max_iters = " << c.max_iters << '\n'
     << "tol_elbo = " << format_double(c.tol_elbo) << '\n'
     << "tol_labels = " << format_double(c.tol_labels) << '\n'
     << "prune_threshold = " << format_double(c.prune_threshold) << '\n'
     << "merge_interval = " << c.merge_interval << '\n'
     << "merge_sweeps = " << c.merge_sweeps << '\n'
     << "seed = " << c.seed << '\n'
     << "label_update_full = " << (c.label_update_full ? "true" : "false") << '\n';
  return os.str();
}

}  // namespace igdtm
