// SPDX-License-Identifier: Apache-2.0
#include "tagan/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tagan/error.hpp"

namespace tagan {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_int_list(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v[i];
  }
  return os.str();
}

struct Parser {
  const std::string& origin;
  int line = 0;

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(origin + ":" + std::to_string(line) + ": key '" + key +
                      "': " + what);
  }

  int to_int(const std::string& key, const std::string& v) const {
    try {
      std::size_t used = 0;
      const int x = std::stoi(v, &used);
      if (used != v.size()) fail(key, "trailing characters in integer '" + v + "'");
      return x;
    } catch (const ConfigError&) {
      throw;
    } catch (...) {
      fail(key, "expected an integer, got '" + v + "'");
    }
  }

  std::uint64_t to_u64(const std::string& key, const std::string& v) const {
    try {
      std::size_t used = 0;
      const unsigned long long x = std::stoull(v, &used);
      if (used != v.size()) fail(key, "trailing characters in integer '" + v + "'");
      return x;
    } catch (const ConfigError&) {
      throw;
    } catch (...) {
      fail(key, "expected an unsigned integer, got '" + v + "'");
    }
  }

  double to_double(const std::string& key, const std::string& v) const {
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) fail(key, "trailing characters in number '" + v + "'");
      return x;
    } catch (const ConfigError&) {
      throw;
    } catch (...) {
      fail(key, "expected a number, got '" + v + "'");
    }
  }

  bool to_bool(const std::string& key, const std::string& v) const {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    fail(key, "expected 0/1/true/false, got '" + v + "'");
  }

  std::vector<int> to_int_list(const std::string& key, const std::string& v) const {
    std::vector<int> out;
    std::size_t start = 0;
    while (start <= v.size()) {
      std::size_t comma = v.find(',', start);
      if (comma == std::string::npos) comma = v.size();
      const std::string part = trim(v.substr(start, comma - start));
      if (part.empty()) fail(key, "empty element in list '" + v + "'");
      out.push_back(to_int(key, part));
      start = comma + 1;
    }
    return out;
  }
};

}  // namespace

RunConfig RunConfig::parse_string(const std::string& text,
                                  const std::string& origin) {
  RunConfig cfg;
  bool saw_dataset = false, saw_out = false;
  Parser p{origin};

  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++p.line;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(p.line) +
                        ": expected key=value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "dataset") {
      cfg.dataset = value;
      saw_dataset = true;
    } else if (key == "out") {
      cfg.out = value;
      saw_out = true;
    } else if (key == "seed") {
      cfg.seed = p.to_u64(key, value);
    } else if (key == "epochs") {
      cfg.epochs = p.to_int(key, value);
    } else if (key == "batch") {
      cfg.batch = p.to_int(key, value);
    } else if (key == "lr") {
      cfg.lr = p.to_double(key, value);
    } else if (key == "beta1") {
      cfg.beta1 = p.to_double(key, value);
    } else if (key == "beta2") {
      cfg.beta2 = p.to_double(key, value);
    } else if (key == "adam_eps") {
      cfg.adam_eps = p.to_double(key, value);
    } else if (key == "lambda1") {
      cfg.lambda1 = p.to_double(key, value);
    } else if (key == "lambda2") {
      cfg.lambda2 = p.to_double(key, value);
    } else if (key == "kl_weight") {
      cfg.kl_weight = p.to_double(key, value);
    } else if (key == "lr_decay_epochs") {
      cfg.lr_decay_epochs = p.to_int(key, value);
    } else if (key == "lr_decay_factor") {
      cfg.lr_decay_factor = p.to_double(key, value);
    } else if (key == "literal_g_real_term") {
      cfg.literal_g_real_term = p.to_bool(key, value);
    } else if (key == "checkpoint_interval") {
      cfg.checkpoint_interval = p.to_int(key, value);
    } else if (key == "eval_interval") {
      cfg.eval_interval = p.to_int(key, value);
    } else if (key == "d_word") {
      cfg.d_word = p.to_int(key, value);
    } else if (key == "d_cond") {
      cfg.d_cond = p.to_int(key, value);
    } else if (key == "pyr_channels") {
      cfg.pyr_channels = p.to_int_list(key, value);
    } else if (key == "gen_channels") {
      cfg.gen_channels = p.to_int_list(key, value);
    } else if (key == "disc_scales") {
      cfg.disc_scales = p.to_int_list(key, value);
    } else if (key == "res_blocks") {
      cfg.res_blocks = p.to_int(key, value);
    } else {
      throw ConfigError(origin + ":" + std::to_string(p.line) +
                        ": unknown key '" + key + "'");
    }
  }

  if (!saw_dataset) throw ConfigError(origin + ": missing required key 'dataset'");
  if (!saw_out) throw ConfigError(origin + ": missing required key 'out'");
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_string(text, path);
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(!dataset.empty(), "dataset path is empty");
  require(!out.empty(), "out path is empty");
  require(lambda1 > 0, "lambda1 must be > 0");
  require(lambda2 > 0, "lambda2 must be > 0");
  require(lr > 0, "lr must be > 0");
  require(batch >= 1, "batch must be >= 1");
  require(epochs >= 0, "epochs must be >= 0");
  require(kl_weight >= 0, "kl_weight must be >= 0");
  require(lr_decay_epochs >= 1, "lr_decay_epochs must be >= 1");
  require(lr_decay_factor > 0 && lr_decay_factor <= 1,
          "lr_decay_factor must be in (0, 1]");
  require(checkpoint_interval >= 1, "checkpoint_interval must be >= 1");
  require(eval_interval >= 0, "eval_interval must be >= 0");
  require(d_word >= 1, "d_word must be >= 1");
  require(d_cond >= 1, "d_cond must be >= 1");
  require(gen_channels.size() == 2, "gen_channels needs exactly 2 entries");
  require(!pyr_channels.empty(), "pyr_channels must not be empty");
  require(!disc_scales.empty(), "disc_scales must not be empty");
  for (int s : disc_scales) {
    require(s >= 0 && s < static_cast<int>(pyr_channels.size()),
            "disc_scales entries must index pyr_channels");
  }
  require(res_blocks >= 0, "res_blocks must be >= 0");
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  os << "adam_eps=" << fmt_double(adam_eps) << '\n';
  os << "batch=" << batch << '\n';
  os << "beta1=" << fmt_double(beta1) << '\n';
  os << "beta2=" << fmt_double(beta2) << '\n';
  os << "checkpoint_interval=" << checkpoint_interval << '\n';
  os << "d_cond=" << d_cond << '\n';
  os << "d_word=" << d_word << '\n';
  os << "dataset=" << dataset << '\n';
  os << "disc_scales=" << fmt_int_list(disc_scales) << '\n';
  os << "epochs=" << epochs << '\n';
  os << "eval_interval=" << eval_interval << '\n';
  os << "gen_channels=" << fmt_int_list(gen_channels) << '\n';
  os << "kl_weight=" << fmt_double(kl_weight) << '\n';
  os << "lambda1=" << fmt_double(lambda1) << '\n';
  os << "lambda2=" << fmt_double(lambda2) << '\n';
  os << "literal_g_real_term=" << (literal_g_real_term ? 1 : 0) << '\n';
  os << "lr=" << fmt_double(lr) << '\n';
  os << "lr_decay_epochs=" << lr_decay_epochs << '\n';
  os << "lr_decay_factor=" << fmt_double(lr_decay_factor) << '\n';
  os << "out=" << out << '\n';
  os << "pyr_channels=" << fmt_int_list(pyr_channels) << '\n';
  os << "res_blocks=" << res_blocks << '\n';
  os << "seed=" << seed << '\n';
  return os.str();
}

Digest256 RunConfig::digest() const { return sha256_string(canonical()); }

void RunConfig::save(const std::string& path) const {
  std::ofstream out_file(path, std::ios::binary | std::ios::trunc);
  if (!out_file) throw IoError("cannot write config file: " + path);
  out_file << canonical();
}

}  // namespace tagan
