#include "dfa/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "binary_io.hpp"
#include "dfa/errors.hpp"

namespace dfa {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string describe(const Layer& layer) {
  return std::visit(
      overloaded{
          [](const Conv2D& l) {
            return "conv " + std::to_string(l.kernel_h) + "x" + std::to_string(l.kernel_w) + " " +
                   std::to_string(l.in_channels) + "->" + std::to_string(l.out_channels);
          },
          [](const MaxPool2D& l) {
            return "maxpool " + std::to_string(l.window_h) + "x" + std::to_string(l.window_w);
          },
          [](const Dense& l) {
            return "dense " + std::to_string(l.in) + "->" + std::to_string(l.out);
          },
          [](const ReLU&) { return std::string("relu"); },
          [](const Flatten&) { return std::string("flatten"); },
          [](const Softmax&) { return std::string("softmax"); },
      },
      layer);
}

// Output extent and leading pad along one axis.
struct Extent {
  int out;
  int pad_before;
};

Extent conv_extent(int in, int kernel, int stride, Padding padding) {
  if (padding == Padding::Same) {
    const int out = (in + stride - 1) / stride;
    const int total = std::max((out - 1) * stride + kernel - in, 0);
    return {out, total / 2};
  }
  if (in < kernel) return {0, 0};
  return {(in - kernel) / stride + 1, 0};
}

struct Tensor {
  TensorShape shape;
  std::vector<double> data;

  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * shape.width + x) * shape.channels + c];
  }
};

Tensor run_conv(const Conv2D& l, const Tensor& in) {
  const Extent ey = conv_extent(in.shape.height, l.kernel_h, l.stride, l.padding);
  const Extent ex = conv_extent(in.shape.width, l.kernel_w, l.stride, l.padding);
  Tensor out{{ey.out, ex.out, l.out_channels}, {}};
  out.data.assign(out.shape.size(), 0.0);
  for (int oy = 0; oy < ey.out; ++oy) {
    for (int ox = 0; ox < ex.out; ++ox) {
      for (int oc = 0; oc < l.out_channels; ++oc) {
        double acc = l.biases[oc];
        for (int ic = 0; ic < l.in_channels; ++ic) {
          for (int ky = 0; ky < l.kernel_h; ++ky) {
            const int iy = oy * l.stride + ky - ey.pad_before;
            if (iy < 0 || iy >= in.shape.height) continue;
            for (int kx = 0; kx < l.kernel_w; ++kx) {
              const int ix = ox * l.stride + kx - ex.pad_before;
              if (ix < 0 || ix >= in.shape.width) continue;
              const std::size_t w =
                  ((static_cast<std::size_t>(oc) * l.in_channels + ic) * l.kernel_h + ky) *
                      l.kernel_w + kx;
              acc += static_cast<double>(l.weights[w]) * in.at(iy, ix, ic);
            }
          }
        }
        out.data[(static_cast<std::size_t>(oy) * ex.out + ox) * l.out_channels + oc] = acc;
      }
    }
  }
  return out;
}

Tensor run_pool(const MaxPool2D& l, const Tensor& in) {
  const int oh = (in.shape.height - l.window_h) / l.stride + 1;
  const int ow = (in.shape.width - l.window_w) / l.stride + 1;
  Tensor out{{oh, ow, in.shape.channels}, {}};
  out.data.reserve(out.shape.size());
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int c = 0; c < in.shape.channels; ++c) {
        double best = -std::numeric_limits<double>::infinity();
        for (int ky = 0; ky < l.window_h; ++ky) {
          for (int kx = 0; kx < l.window_w; ++kx) {
            best = std::max(best, in.at(oy * l.stride + ky, ox * l.stride + kx, c));
          }
        }
        out.data.push_back(best);
      }
    }
  }
  return out;
}

Tensor run_dense(const Dense& l, const Tensor& in) {
  Tensor out{{1, 1, l.out}, std::vector<double>(static_cast<std::size_t>(l.out))};
  for (int o = 0; o < l.out; ++o) {
    double acc = l.biases[o];
    const float* row = l.weights.data() + static_cast<std::size_t>(o) * l.in;
    for (int i = 0; i < l.in; ++i) acc += static_cast<double>(row[i]) * in.data[i];
    out.data[o] = acc;
  }
  return out;
}

void require(bool ok, std::size_t index, const Layer& layer, const std::string& what) {
  if (!ok) {
    throw ConfigError("network layer " + std::to_string(index) + " (" + describe(layer) +
                      "): " + what);
  }
}

}  // namespace

std::string TensorShape::str() const {
  return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

std::vector<TensorShape> validate(const NetworkDefinition& net) {
  try {
    validate(net.input);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("network input: ") + e.what());
  }
  net.normalization.validate(net.input.channels);
  if (net.layers.empty()) throw ConfigError("network has no layers");

  std::vector<TensorShape> shapes;
  TensorShape cur{net.input.height, net.input.width, net.input.channels};
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& layer = net.layers[i];
    std::visit(
        overloaded{
            [&](const Conv2D& l) {
              require(l.kernel_h >= 1 && l.kernel_w >= 1 && l.in_channels >= 1 &&
                          l.out_channels >= 1 && l.stride >= 1,
                      i, layer, "dimensions must be positive");
              require(l.in_channels == cur.channels, i, layer,
                      "expects " + std::to_string(l.in_channels) + " input channels, got " +
                          cur.str());
              require(l.weights.size() == l.weight_count(), i, layer,
                      "weight count " + std::to_string(l.weights.size()) + " != " +
                          std::to_string(l.weight_count()));
              require(l.biases.size() == static_cast<std::size_t>(l.out_channels), i, layer,
                      "bias count mismatch");
              const Extent ey = conv_extent(cur.height, l.kernel_h, l.stride, l.padding);
              const Extent ex = conv_extent(cur.width, l.kernel_w, l.stride, l.padding);
              require(ey.out >= 1 && ex.out >= 1, i, layer, "kernel larger than input " + cur.str());
              cur = {ey.out, ex.out, l.out_channels};
            },
            [&](const MaxPool2D& l) {
              require(l.window_h >= 1 && l.window_w >= 1 && l.stride >= 1, i, layer,
                      "dimensions must be positive");
              require(cur.height >= l.window_h && cur.width >= l.window_w, i, layer,
                      "window larger than input " + cur.str());
              cur = {(cur.height - l.window_h) / l.stride + 1,
                     (cur.width - l.window_w) / l.stride + 1, cur.channels};
            },
            [&](const Dense& l) {
              require(l.in >= 1 && l.out >= 1, i, layer, "dimensions must be positive");
              require(cur.size() == static_cast<std::size_t>(l.in), i, layer,
                      "input " + cur.str() + " has " + std::to_string(cur.size()) + " values");
              require(l.weights.size() == l.weight_count(), i, layer,
                      "weight count " + std::to_string(l.weights.size()) + " != " +
                          std::to_string(l.weight_count()));
              require(l.biases.size() == static_cast<std::size_t>(l.out), i, layer,
                      "bias count mismatch");
              cur = {1, 1, l.out};
            },
            [&](const ReLU&) {},
            [&](const Flatten&) { cur = {1, 1, static_cast<int>(cur.size())}; },
            [&](const Softmax&) {
              require(i + 1 == net.layers.size(), i, layer, "softmax must be the last layer");
            },
        },
        layer);
    shapes.push_back(cur);
  }
  if (!std::holds_alternative<Softmax>(net.layers.back())) {
    throw ConfigError("network must end with a softmax layer");
  }
  if (cur.size() < 2) throw ConfigError("network must output at least 2 classes");
  return shapes;
}

std::vector<double> forward_partial(const NetworkDefinition& net, const RealImage& v,
                                    std::size_t layers) {
  validate(net);
  require_input_shape(net.input, v.shape());
  Tensor t{{net.input.height, net.input.width, net.input.channels},
           std::vector<double>(v.values().begin(), v.values().end())};
  const std::size_t n = std::min(layers, net.layers.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::visit(overloaded{
                   [&](const Conv2D& l) { t = run_conv(l, t); },
                   [&](const MaxPool2D& l) { t = run_pool(l, t); },
                   [&](const Dense& l) { t = run_dense(l, t); },
                   [&](const ReLU&) {
                     for (double& x : t.data) x = std::max(x, 0.0);
                   },
                   [&](const Flatten&) { t.shape = {1, 1, static_cast<int>(t.shape.size())}; },
                   [&](const Softmax&) { t.data = softmax(t.data); },
               },
               net.layers[i]);
  }
  return std::move(t.data);
}

ProbabilityVector forward_real(const NetworkDefinition& net, const RealImage& v) {
  return ProbabilityVector(forward_partial(net, v, net.layers.size()));
}

ProbabilityVector forward(const NetworkDefinition& net, const IntegerImage& d) {
  require_input_shape(net.input, d.shape());
  return forward_real(net, normalize(d, net.normalization));
}

// ---------------------------------------------------------------------------
// Weight file format

namespace {

int parse_int(const std::string& token, const std::string& where) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used == token.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError(where + ": expected an integer, got '" + token + "'");
}

std::vector<std::string> split(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(t);
  return tokens;
}

void read_floats(std::istream& in, std::vector<float>& out, std::size_t count,
                 std::streamoff& offset, const std::string& where) {
  // Chunked so a corrupt header cannot force one huge allocation up front.
  constexpr std::size_t kChunk = 1 << 16;
  out.clear();
  std::vector<unsigned char> raw;
  std::size_t done = 0;
  while (done < count) {
    const std::size_t n = std::min(kChunk, count - done);
    raw.resize(n * 4);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got != raw.size()) {
      throw FormatError(where + ": truncated payload at byte offset " +
                        std::to_string(offset + static_cast<std::streamoff>(got)) + ", expected " +
                        std::to_string(count * 4) + " bytes, got " +
                        std::to_string(done * 4 + got));
    }
    for (std::size_t i = 0; i < n; ++i) out.push_back(detail::f32_from_le(raw.data() + 4 * i));
    done += n;
    offset += static_cast<std::streamoff>(raw.size());
  }
}

}  // namespace

NetworkDefinition read_network(std::istream& in, const std::string& source) {
  NetworkDefinition net;
  bool have_shape = false;
  bool have_weights_line = false;
  std::string line;
  std::size_t line_no = 0;
  std::streamoff offset = 0;

  while (std::getline(in, line)) {
    ++line_no;
    offset += static_cast<std::streamoff>(line.size()) + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = source + ":" + std::to_string(line_no);
    const auto tokens = split(line);
    if (tokens.empty() || tokens[0][0] == '#') continue;
    const std::string& key = tokens[0];
    auto arity = [&](std::size_t lo, std::size_t hi) {
      if (tokens.size() - 1 < lo || tokens.size() - 1 > hi) {
        throw FormatError(where + ": '" + key + "' takes " + std::to_string(lo) +
                          (lo == hi ? "" : "-" + std::to_string(hi)) + " arguments");
      }
    };

    if (key == "weights") {
      have_weights_line = true;
      break;
    }
    if (key != "shape" && !have_shape) {
      throw FormatError(where + ": 'shape' must be the first header line");
    }
    if (key == "shape") {
      arity(3, 3);
      try {
        net.input = ImageShape(parse_int(tokens[1], where), parse_int(tokens[2], where),
                               parse_int(tokens[3], where));
      } catch (const std::invalid_argument& e) {
        throw FormatError(where + ": " + e.what());
      }
      have_shape = true;
    } else if (key == "normalize") {
      const auto start = line.find("normalize") + 9;
      try {
        net.normalization = parse_scheme(line.substr(start), net.input.channels);
      } catch (const ConfigError& e) {
        throw FormatError(where + ": " + e.what());
      }
    } else if (key == "conv") {
      arity(4, 6);
      Conv2D c;
      c.kernel_h = parse_int(tokens[1], where);
      c.kernel_w = parse_int(tokens[2], where);
      c.in_channels = parse_int(tokens[3], where);
      c.out_channels = parse_int(tokens[4], where);
      if (tokens.size() > 5) c.stride = parse_int(tokens[5], where);
      if (tokens.size() > 6) {
        if (tokens[6] == "same") c.padding = Padding::Same;
        else if (tokens[6] == "valid") c.padding = Padding::Valid;
        else throw FormatError(where + ": padding must be 'valid' or 'same'");
      }
      net.layers.emplace_back(std::move(c));
    } else if (key == "maxpool") {
      arity(3, 3);
      net.layers.emplace_back(MaxPool2D{parse_int(tokens[1], where), parse_int(tokens[2], where),
                                        parse_int(tokens[3], where)});
    } else if (key == "dense") {
      arity(2, 2);
      Dense d;
      d.in = parse_int(tokens[1], where);
      d.out = parse_int(tokens[2], where);
      net.layers.emplace_back(std::move(d));
    } else if (key == "relu") {
      arity(0, 0);
      net.layers.emplace_back(ReLU{});
    } else if (key == "flatten") {
      arity(0, 0);
      net.layers.emplace_back(Flatten{});
    } else if (key == "softmax") {
      arity(0, 0);
      net.layers.emplace_back(Softmax{});
    } else {
      throw FormatError(where + ": unknown header keyword '" + key + "'");
    }
  }
  if (!have_weights_line) {
    throw FormatError(source + ": header is not terminated by a 'weights' line");
  }

  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Layer& layer = net.layers[i];
    const std::string where = source + ": layer " + std::to_string(i) + " (" + describe(layer) + ")";
    if (auto* c = std::get_if<Conv2D>(&layer)) {
      if (c->kernel_h < 1 || c->kernel_w < 1 || c->in_channels < 1 || c->out_channels < 1) {
        throw FormatError(where + ": dimensions must be positive");
      }
      read_floats(in, c->weights, c->weight_count(), offset, where + " weights");
      read_floats(in, c->biases, static_cast<std::size_t>(c->out_channels), offset,
                  where + " biases");
    } else if (auto* d = std::get_if<Dense>(&layer)) {
      if (d->in < 1 || d->out < 1) throw FormatError(where + ": dimensions must be positive");
      read_floats(in, d->weights, d->weight_count(), offset, where + " weights");
      read_floats(in, d->biases, static_cast<std::size_t>(d->out), offset, where + " biases");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(source + ": trailing bytes after payload at byte offset " +
                      std::to_string(offset));
  }
  validate(net);
  return net;
}

NetworkDefinition load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weight file " + path.string());
  return read_network(in, path.string());
}

void write_network(const NetworkDefinition& net, std::ostream& out) {
  validate(net);
  out << "shape " << net.input.width << ' ' << net.input.height << ' ' << net.input.channels
      << '\n';
  out << "normalize " << format_scheme(net.normalization) << '\n';
  for (const Layer& layer : net.layers) {
    std::visit(overloaded{
                   [&](const Conv2D& l) {
                     out << "conv " << l.kernel_h << ' ' << l.kernel_w << ' ' << l.in_channels
                         << ' ' << l.out_channels << ' ' << l.stride << ' '
                         << (l.padding == Padding::Same ? "same" : "valid") << '\n';
                   },
                   [&](const MaxPool2D& l) {
                     out << "maxpool " << l.window_h << ' ' << l.window_w << ' ' << l.stride
                         << '\n';
                   },
                   [&](const Dense& l) { out << "dense " << l.in << ' ' << l.out << '\n'; },
                   [&](const ReLU&) { out << "relu\n"; },
                   [&](const Flatten&) { out << "flatten\n"; },
                   [&](const Softmax&) { out << "softmax\n"; },
               },
               layer);
  }
  out << "weights\n";
  for (const Layer& layer : net.layers) {
    if (const auto* c = std::get_if<Conv2D>(&layer)) {
      for (float w : c->weights) detail::write_f32_le(out, w);
      for (float b : c->biases) detail::write_f32_le(out, b);
    } else if (const auto* d = std::get_if<Dense>(&layer)) {
      for (float w : d->weights) detail::write_f32_le(out, w);
      for (float b : d->biases) detail::write_f32_le(out, b);
    }
  }
}

void save_network(const NetworkDefinition& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write weight file " + path.string());
  write_network(net, out);
  if (!out) throw std::runtime_error("failed writing weight file " + path.string());
}

NetworkOracle::NetworkOracle(NetworkDefinition net) : net_(std::move(net)) {
  classes_ = validate(net_).back().size();
}

ProbabilityVector NetworkOracle::predict(const IntegerImage& d) const { return forward(net_, d); }

ProbabilityVector NetworkOracle::predict_real(const RealImage& v) const {
  return forward_real(net_, v);
}

}  // namespace dfa
