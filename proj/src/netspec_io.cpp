#include "conformal/netspec_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "conformal/error.hpp"
#include "json.hpp"

namespace conformal {

namespace {

using nlohmann::json;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw SpecError(where + ": " + what);
}

std::size_t as_size(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(where, "expected a non-negative integer");
  return v.get<std::size_t>();
}

double as_double(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(where, "value is not finite");
  return d;
}

std::vector<std::size_t> per_dim(const json& layer, const char* key, std::size_t rank,
                                 std::size_t fallback, const std::string& where) {
  const std::string field = where + "." + key;
  if (!layer.contains(key)) return std::vector<std::size_t>(rank, fallback);
  const json& v = layer.at(key);
  if (v.is_array()) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_size(v[i], field + "[" + std::to_string(i) + "]"));
    if (out.size() != rank)
      fail(field, "expected " + std::to_string(rank) + " entries, got " + std::to_string(out.size()));
    return out;
  }
  return std::vector<std::size_t>(rank, as_size(v, field));
}

std::size_t rank_of(const std::string& type) { return type.ends_with("2d") ? 2 : 1; }

LayerSpec parse_layer(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "layer must be an object");
  if (!j.contains("type") || !j.at("type").is_string()) fail(where + ".type", "missing layer type");
  const std::string type = j.at("type").get<std::string>();

  if (type == "conv1d" || type == "conv2d") {
    const std::size_t rank = rank_of(type);
    Conv c;
    c.out_channels = j.contains("out_channels") ? as_size(j.at("out_channels"), where + ".out_channels") : 1;
    if (!j.contains("kernel")) fail(where + ".kernel", "missing");
    c.kernel = per_dim(j, "kernel", rank, 1, where);
    if (!j.contains("weights") || !j.at("weights").is_array()) fail(where + ".weights", "expected an array");
    const json& w = j.at("weights");
    for (std::size_t i = 0; i < w.size(); ++i)
      c.weights.push_back(as_double(w[i], where + ".weights[" + std::to_string(i) + "]"));
    c.padding = per_dim(j, "padding", rank, 0, where);
    c.dilation = per_dim(j, "dilation", rank, 1, where);
    c.stride = per_dim(j, "stride", rank, 1, where);
    return c;
  }
  if (type == "avgpool1d" || type == "avgpool2d") {
    const std::size_t rank = rank_of(type);
    AvgPool p;
    if (!j.contains("kernel")) fail(where + ".kernel", "missing");
    p.kernel = per_dim(j, "kernel", rank, 1, where);
    p.padding = per_dim(j, "padding", rank, 0, where);
    p.stride = j.contains("stride") ? per_dim(j, "stride", rank, 1, where) : p.kernel;
    return p;
  }
  if (type == "dropout") {
    Dropout d;
    d.rate = j.contains("rate") ? as_double(j.at("rate"), where + ".rate") : 0.0;
    if (j.contains("mask")) {
      const json& m = j.at("mask");
      if (!m.is_array()) fail(where + ".mask", "expected an array");
      std::vector<std::uint8_t> mask;
      for (std::size_t i = 0; i < m.size(); ++i) {
        const std::size_t bit = as_size(m[i], where + ".mask[" + std::to_string(i) + "]");
        if (bit > 1) fail(where + ".mask[" + std::to_string(i) + "]", "mask entries must be 0 or 1");
        mask.push_back(static_cast<std::uint8_t>(bit));
      }
      d.mask = std::move(mask);
    }
    return d;
  }
  if (type == "flatten") return Flatten{};
  if (type == "respro") {
    ReSPro r;
    if (j.contains("alpha") && !j.at("alpha").is_null()) r.alpha = as_double(j.at("alpha"), where + ".alpha");
    return r;
  }
  fail(where + ".type", "unsupported layer kind '" + type + "'");
}

json dims_json(const std::vector<std::size_t>& v) { return json(v); }

json layer_json(const LayerSpec& layer) {
  const std::string type = kind_name(kind_of(layer));
  return std::visit(
      Overloaded{
          [&](const Conv& c) {
            return json{{"type", type},          {"out_channels", c.out_channels},
                        {"kernel", dims_json(c.kernel)}, {"weights", c.weights},
                        {"padding", dims_json(c.padding)}, {"dilation", dims_json(c.dilation)},
                        {"stride", dims_json(c.stride)}};
          },
          [&](const AvgPool& p) {
            return json{{"type", type},
                        {"kernel", dims_json(p.kernel)},
                        {"padding", dims_json(p.padding)},
                        {"stride", dims_json(p.stride)}};
          },
          [&](const Dropout& d) {
            json out{{"type", type}, {"rate", d.rate}};
            if (d.mask) {
              std::vector<int> bits(d.mask->begin(), d.mask->end());
              out["mask"] = bits;
            }
            return out;
          },
          [&](const Flatten&) { return json{{"type", type}}; },
          [&](const ReSPro& r) {
            json out{{"type", type}};
            if (r.alpha) out["alpha"] = *r.alpha;
            return out;
          },
      },
      layer);
}

std::vector<double> parse_line(const std::string& line, std::size_t line_no) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t end = line.find(',', pos);
    if (end == std::string::npos) end = line.size();
    std::size_t a = pos, b = end;
    while (a < b && (line[a] == ' ' || line[a] == '\t')) ++a;
    while (b > a && (line[b - 1] == ' ' || line[b - 1] == '\t' || line[b - 1] == '\r')) --b;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(line.data() + a, line.data() + b, v);
    if (ec != std::errc() || ptr != line.data() + b || a == b || !std::isfinite(v))
      throw Error("line " + std::to_string(line_no) + ": cannot parse '" + line.substr(a, b - a) + "'");
    values.push_back(v);
    pos = end + 1;
  }
  return values;
}

}  // namespace

NetworkSpec parse_network(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw SpecError(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SpecError("network document must be a JSON object");

  NetworkSpec net;
  if (!doc.contains("input") || !doc.at("input").is_array()) fail("input", "expected an array of spatial dims");
  const json& input = doc.at("input");
  for (std::size_t i = 0; i < input.size(); ++i)
    net.input.spatial.push_back(as_size(input[i], "input[" + std::to_string(i) + "]"));
  net.input.channels = doc.contains("channels") ? as_size(doc.at("channels"), "channels") : 1;

  if (doc.contains("order")) {
    if (!doc.at("order").is_string()) fail("order", "expected a string");
    const std::string order = doc.at("order").get<std::string>();
    if (order == "channel_major") net.order = ElementOrder::channel_major;
    else if (order == "channel_last") net.order = ElementOrder::channel_last;
    else fail("order", "expected channel_major or channel_last");
  }
  if (doc.contains("encoding")) {
    if (!doc.at("encoding").is_string()) fail("encoding", "expected a string");
    const std::string enc = doc.at("encoding").get<std::string>();
    if (enc == "norm") net.encoding = Encoding::norm;
    else if (enc == "canonical") net.encoding = Encoding::canonical;
    else fail("encoding", "expected norm or canonical");
  }
  if (doc.contains("input_bound")) net.input_bound = as_double(doc.at("input_bound"), "input_bound");

  if (!doc.contains("layers") || !doc.at("layers").is_array()) fail("layers", "expected an array");
  const json& layers = doc.at("layers");
  for (std::size_t i = 0; i < layers.size(); ++i)
    net.layers.push_back(parse_layer(layers[i], "layers[" + std::to_string(i) + "]"));

  validate(net);
  return net;
}

NetworkSpec load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open network file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_network(buf.str());
}

std::string dump_network(const NetworkSpec& net) {
  json doc;
  doc["input"] = net.input.spatial;
  doc["channels"] = net.input.channels;
  doc["order"] = net.order == ElementOrder::channel_major ? "channel_major" : "channel_last";
  doc["encoding"] = net.encoding == Encoding::norm ? "norm" : "canonical";
  doc["input_bound"] = net.input_bound;
  doc["layers"] = json::array();
  for (const auto& l : net.layers) doc["layers"].push_back(layer_json(l));
  return doc.dump(2) + "\n";
}

void save_network(const NetworkSpec& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write network file " + path.string());
  out << dump_network(net);
}

std::vector<std::vector<double>> read_samples(std::istream& in) {
  std::vector<std::vector<double>> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    samples.push_back(parse_line(line, line_no));
  }
  return samples;
}

std::vector<std::vector<double>> load_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open sample file " + path.string());
  return read_samples(in);
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("cannot format value");
  return std::string(buf, ptr);
}

void write_samples(std::ostream& out, const std::vector<std::vector<double>>& samples) {
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out << ',';
      out << format_double(s[i]);
    }
    out << '\n';
  }
}

}  // namespace conformal
