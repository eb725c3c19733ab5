// Model file format, version 1. Whitespace-separated tokens; line breaks are
// cosmetic. Doubles are C99 hex floats (printf "%a"), so values round-trip
// bit-exactly. Feature names are percent-encoded outside [A-Za-z0-9_.-].
//
//   dml-model 1
//   seed <u64>
//   mc_samples <n>
//   features <D> <name>...
//   feature_standardizer <vector means> <vector stds>
//   attribution steps <n> lambda <f> baseline <vector>
//   gbrt base_score <f> learning_rate <f> importance <vector> trees <K>
//     tree <node count>
//       node <feature> <threshold> <left> <right> <value>     (repeated)
//   mlp dropout <f> target_mean <f> target_scale <f> <network>
//   gate <network>
//   meta_standardizer <vector means> <vector stds>
//   end
//
// where <vector> is "<n> v_1 ... v_n" and <network> is
// "network <L>" followed by L times "layer <out> <in> <out*in weights> <out biases>".

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "dml/error.hpp"
#include "dml/pipeline.hpp"

namespace dml::pipeline {

namespace {

constexpr std::string_view kMagic = "dml-model";

class Writer {
 public:
  Writer& word(std::string_view w) {
    separate();
    out_ << w;
    return *this;
  }
  Writer& number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return word(buf);
  }
  Writer& integer(std::uint64_t v) { return word(std::to_string(v)); }
  Writer& signed_integer(std::int64_t v) { return word(std::to_string(v)); }
  Writer& vector(const numkit::Vector& v) {
    integer(v.size());
    for (double e : v) number(e);
    return *this;
  }
  Writer& newline() {
    out_ << '\n';
    fresh_line_ = true;
    return *this;
  }
  std::string str() const { return out_.str(); }

 private:
  void separate() {
    if (!fresh_line_) out_ << ' ';
    fresh_line_ = false;
  }
  std::ostringstream out_;
  bool fresh_line_ = true;
};

std::string encode_name(const std::string& name) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : name) {
    const bool plain = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                       (c >= '0' && c <= '9') || c == '_' || c == '.' || c == '-';
    if (plain) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  if (out.empty()) out = "%";  // empty name marker
  return out;
}

void write_network(Writer& w, const nn::Network& net) {
  w.word("network").integer(net.layers().size()).newline();
  for (const auto& layer : net.layers()) {
    w.word("layer").integer(layer.outputs()).integer(layer.inputs()).newline();
    for (std::size_t r = 0; r < layer.outputs(); ++r) {
      for (double v : layer.weights.row(r)) w.number(v);
      w.newline();
    }
    for (double v : layer.bias) w.number(v);
    w.newline();
  }
}

class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  std::string_view token() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of file", text_.size());
    start_ = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_])) ++pos_;
    return std::string_view(text_).substr(start_, pos_ - start_);
  }

  void expect(std::string_view keyword) {
    const auto t = token();
    if (t != keyword)
      fail("expected '" + std::string(keyword) + "', found '" + std::string(t) + "'");
  }

  std::uint64_t unsigned_integer() {
    const std::string t(token());
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
      fail("expected an unsigned integer, found '" + t + "'");
    errno = 0;
    const auto v = std::strtoull(t.c_str(), nullptr, 10);
    if (errno == ERANGE) fail("integer out of range");
    return v;
  }

  /// Bounded count, guarding allocations against corrupt headers.
  std::size_t count(std::size_t limit = std::size_t{1} << 26) {
    const auto v = unsigned_integer();
    if (v > limit) fail("count " + std::to_string(v) + " is implausibly large");
    return static_cast<std::size_t>(v);
  }

  std::int64_t signed_integer() {
    const std::string t(token());
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE)
      fail("expected an integer, found '" + t + "'");
    return v;
  }

  double number() {
    const std::string t(token());
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size()) fail("expected a number, found '" + t + "'");
    if (!std::isfinite(v)) fail("non-finite number '" + t + "'");
    return v;
  }

  numkit::Vector vector() {
    numkit::Vector v(count());
    for (double& e : v) e = number();
    return v;
  }

  std::string name() {
    const std::string t(token());
    if (t == "%") return {};
    std::string out;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] != '%') {
        out.push_back(t[i]);
        continue;
      }
      if (i + 2 >= t.size()) fail("truncated escape in name");
      const std::string hex = t.substr(i + 1, 2);
      char* end = nullptr;
      const long c = std::strtol(hex.c_str(), &end, 16);
      if (hex.size() != 2 || end != hex.c_str() + 2) fail("bad escape in name");
      out.push_back(static_cast<char>(c));
      i += 2;
    }
    return out;
  }

  bool at_end() {
    skip_space();
    return pos_ >= text_.size();
  }

  std::size_t token_offset() const noexcept { return start_; }

  [[noreturn]] void fail(const std::string& message) const { throw ParseError(message, start_); }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r'; }
  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  std::size_t start_ = 0;
};

nn::Network read_network(Reader& r) {
  r.expect("network");
  const std::size_t n_layers = r.count(1024);
  if (n_layers == 0) r.fail("network has no layers");
  std::vector<nn::DenseLayer> layers;
  for (std::size_t l = 0; l < n_layers; ++l) {
    r.expect("layer");
    const std::size_t out = r.count(1 << 16);
    const std::size_t in = r.count(1 << 16);
    nn::DenseLayer layer{numkit::Matrix(out, in), numkit::Vector(out)};
    for (double& v : layer.weights.data()) v = r.number();
    for (double& v : layer.bias) v = r.number();
    if (!layers.empty() && layers.back().outputs() != in)
      r.fail("layer " + std::to_string(l) + " input width does not chain");
    layers.push_back(std::move(layer));
  }
  return nn::Network(std::move(layers));
}

numkit::Standardizer read_standardizer(Reader& r) {
  numkit::Standardizer s;
  s.means = r.vector();
  s.stds = r.vector();
  if (s.means.size() != s.stds.size()) r.fail("standardizer vectors differ in length");
  for (double sd : s.stds)
    if (!(sd > 0.0)) r.fail("standardizer has a non-positive scale");
  return s;
}

}  // namespace

std::string serialize_model(const DmlModel& model) {
  model.validate();
  Writer w;
  w.word(kMagic).integer(kFormatVersion).newline();
  w.word("seed").integer(model.seed).newline();
  w.word("mc_samples").integer(model.mc_samples).newline();
  w.word("features").integer(model.feature_names.size());
  for (const auto& name : model.feature_names) w.word(encode_name(name));
  w.newline();
  w.word("feature_standardizer").vector(model.feature_standardizer.means);
  w.vector(model.feature_standardizer.stds).newline();
  w.word("attribution").word("steps").integer(model.attribution.steps);
  w.word("lambda").number(model.attribution.lambda);
  w.word("baseline").vector(model.attribution.baseline).newline();

  const auto& g = model.gbrt;
  w.word("gbrt").word("base_score").number(g.base_score);
  w.word("learning_rate").number(g.learning_rate);
  w.word("importance").vector(g.gain_importance);
  w.word("trees").integer(g.trees.size()).newline();
  for (const auto& tree : g.trees) {
    w.word("tree").integer(tree.nodes.size()).newline();
    for (const auto& node : tree.nodes) {
      w.word("node").signed_integer(node.feature).number(node.threshold);
      w.signed_integer(node.left).signed_integer(node.right).number(node.value).newline();
    }
  }

  w.word("mlp").word("dropout").number(model.mlp.dropout_rate);
  w.word("target_mean").number(model.mlp.target_mean);
  w.word("target_scale").number(model.mlp.target_scale).newline();
  write_network(w, model.mlp.net);
  w.word("gate").newline();
  write_network(w, model.gate.net);
  w.word("meta_standardizer").vector(model.meta_standardizer.means);
  w.vector(model.meta_standardizer.stds).newline();
  w.word("end").newline();
  return w.str();
}

DmlModel parse_model(const std::string& text) {
  Reader r(text);
  const auto magic = r.token();
  if (magic != kMagic) r.fail("not a model file (bad magic)");
  const auto version = r.unsigned_integer();
  if (version != static_cast<std::uint64_t>(kFormatVersion))
    throw UnsupportedFormat("model format version " + std::to_string(version) +
                            " is not supported (expected " + std::to_string(kFormatVersion) + ")");

  DmlModel m;
  r.expect("seed");
  m.seed = r.unsigned_integer();
  r.expect("mc_samples");
  m.mc_samples = r.count();
  r.expect("features");
  m.feature_names.resize(r.count(1 << 20));
  for (auto& name : m.feature_names) name = r.name();
  r.expect("feature_standardizer");
  m.feature_standardizer = read_standardizer(r);
  r.expect("attribution");
  r.expect("steps");
  m.attribution.steps = r.count();
  r.expect("lambda");
  m.attribution.lambda = r.number();
  r.expect("baseline");
  m.attribution.baseline = r.vector();

  r.expect("gbrt");
  r.expect("base_score");
  m.gbrt.base_score = r.number();
  r.expect("learning_rate");
  m.gbrt.learning_rate = r.number();
  r.expect("importance");
  m.gbrt.gain_importance = r.vector();
  r.expect("trees");
  m.gbrt.trees.resize(r.count(1 << 20));
  const auto d = static_cast<std::int64_t>(m.gbrt.gain_importance.size());
  for (auto& tree : m.gbrt.trees) {
    r.expect("tree");
    tree.nodes.resize(r.count());
    if (tree.nodes.empty()) r.fail("tree has no nodes");
    const auto n_nodes = static_cast<std::int64_t>(tree.nodes.size());
    for (std::int64_t k = 0; k < n_nodes; ++k) {
      auto& node = tree.nodes[static_cast<std::size_t>(k)];
      r.expect("node");
      const auto feature = r.signed_integer();
      node.threshold = r.number();
      const auto left = r.signed_integer();
      const auto right = r.signed_integer();
      node.value = r.number();
      if (feature < -1 || feature >= d) r.fail("node feature index out of range");
      node.feature = static_cast<int>(feature);
      if (feature >= 0) {
        // Children always follow their parent, which rules out cycles.
        if (left <= k || left >= n_nodes || right <= k || right >= n_nodes)
          r.fail("node child index out of range");
      }
      node.left = static_cast<std::int32_t>(left);
      node.right = static_cast<std::int32_t>(right);
    }
  }

  r.expect("mlp");
  r.expect("dropout");
  m.mlp.dropout_rate = r.number();
  r.expect("target_mean");
  m.mlp.target_mean = r.number();
  r.expect("target_scale");
  m.mlp.target_scale = r.number();
  m.mlp.net = read_network(r);
  r.expect("gate");
  m.gate.net = read_network(r);
  r.expect("meta_standardizer");
  m.meta_standardizer = read_standardizer(r);
  r.expect("end");
  if (!r.at_end()) {
    r.token();
    r.fail("trailing data after 'end'");
  }

  try {
    m.validate();
  } catch (const InvalidInput& e) {
    throw ParseError(std::string("inconsistent model: ") + e.what(), r.token_offset());
  }
  return m;
}

void save_model(const DmlModel& model, const std::string& path) {
  const std::string text = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

DmlModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path + "'");
  return parse_model(buffer.str());
}

}  // namespace dml::pipeline
