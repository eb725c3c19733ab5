#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "dml/error.hpp"
#include "dml/io.hpp"

namespace dml::io {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_sizes(const std::vector<std::size_t>& sizes) {
  std::string out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(sizes[i]);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw InvalidInput("config key '" + key + "': expected " + want + ", got '" + value + "'");
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& value) {
  const auto v = trim(value);
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
    bad_value(key, value, "a non-negative integer");
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  const std::string v(trim(value));
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out))
    bad_value(key, value, "a finite real number");
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  const std::string_view v = trim(value);
  if (v.empty() || v == "none") return out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = v.find(',', start);
    const std::string part(v.substr(start, comma == v.npos ? v.npos : comma - start));
    out.push_back(static_cast<std::size_t>(parse_unsigned(key, part)));
    if (comma == v.npos) break;
    start = comma + 1;
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Field>& fields() {
  using Cfg = RunConfig;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    auto unsigned_field = [&](const std::string& key, auto ref) {
      f.push_back({key,
                   [key, ref](Cfg& c, const std::string& v) {
                     auto& target = ref(c);
                     target = static_cast<std::remove_reference_t<decltype(target)>>(
                         parse_unsigned(key, v));
                   },
                   [ref](const Cfg& c) {
                     return std::to_string(ref(c));
                   }});
    };
    auto real_field = [&](const std::string& key, auto ref) {
      f.push_back({key, [key, ref](Cfg& c, const std::string& v) { ref(c) = parse_real(key, v); },
                   [ref](const Cfg& c) { return format_real(ref(c)); }});
    };
    auto sizes_field = [&](const std::string& key, auto ref) {
      f.push_back({key, [key, ref](Cfg& c, const std::string& v) { ref(c) = parse_sizes(key, v); },
                   [ref](const Cfg& c) { return format_sizes(ref(c)); }});
    };

    unsigned_field("seed", [](auto& c) -> auto& { return c.dml().seed; });
    real_field("train_fraction", [](auto& c) -> auto& { return c.train_fraction(); });
    real_field("meta_fraction", [](auto& c) -> auto& { return c.dml().meta_fraction; });
    real_field("alpha", [](auto& c) -> auto& { return c.dml().gate.alpha; });
    real_field("lambda", [](auto& c) -> auto& { return c.dml().attribution.lambda; });
    unsigned_field("mc_samples", [](auto& c) -> auto& { return c.dml().mc_samples; });
    unsigned_field("ig_steps", [](auto& c) -> auto& { return c.dml().attribution.steps; });

    unsigned_field("gbrt.n_estimators",
                   [](auto& c) -> auto& { return c.dml().gbrt.n_estimators; });
    real_field("gbrt.learning_rate", [](auto& c) -> auto& { return c.dml().gbrt.learning_rate; });
    unsigned_field("gbrt.max_depth", [](auto& c) -> auto& { return c.dml().gbrt.max_depth; });
    unsigned_field("gbrt.min_samples_leaf",
                   [](auto& c) -> auto& { return c.dml().gbrt.min_samples_leaf; });

    sizes_field("mlp.hidden_sizes",
                [](auto& c) -> auto& { return c.dml().mlp.hidden_sizes; });
    real_field("mlp.dropout_rate", [](auto& c) -> auto& { return c.dml().mlp.dropout_rate; });
    unsigned_field("mlp.epochs", [](auto& c) -> auto& { return c.dml().mlp.epochs; });
    unsigned_field("mlp.batch_size", [](auto& c) -> auto& { return c.dml().mlp.batch_size; });
    real_field("mlp.learning_rate", [](auto& c) -> auto& { return c.dml().mlp.learning_rate; });
    real_field("mlp.momentum", [](auto& c) -> auto& { return c.dml().mlp.momentum; });

    sizes_field("gate.hidden_sizes",
                [](auto& c) -> auto& { return c.dml().gate.hidden_sizes; });
    unsigned_field("gate.epochs", [](auto& c) -> auto& { return c.dml().gate.epochs; });
    unsigned_field("gate.batch_size",
                   [](auto& c) -> auto& { return c.dml().gate.batch_size; });
    real_field("gate.learning_rate", [](auto& c) -> auto& { return c.dml().gate.learning_rate; });
    real_field("gate.momentum", [](auto& c) -> auto& { return c.dml().gate.momentum; });
    return f;
  }();
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& field : fields()) {
    if (field.key == key) {
      RunConfig next = *this;
      field.set(next, value);
      try {
        next.dml_.validate();
      } catch (const InvalidInput& e) {
        throw InvalidInput(key + "=" + value + " rejected: " + e.what());
      }
      *this = std::move(next);
      return;
    }
  }
  throw InvalidInput("unknown config key '" + key + "'");
}

void RunConfig::load(std::string_view text, const std::string& origin) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != line.npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == line.npos)
      throw InvalidInput(origin + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    try {
      set(key, value);
    } catch (const InvalidInput& e) {
      throw InvalidInput(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  load(buffer.str(), path);
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& field : fields()) out.emplace_back(field.key, field.get(*this));
  return out;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> k;
    for (const auto& field : fields()) k.push_back(field.key);
    return k;
  }();
  return names;
}

}  // namespace dml::io
