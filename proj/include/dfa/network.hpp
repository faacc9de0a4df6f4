#ifndef DFA_NETWORK_HPP
#define DFA_NETWORK_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "dfa/image.hpp"
#include "dfa/normalization.hpp"
#include "dfa/oracle.hpp"

namespace dfa {

enum class Padding { Valid, Same };

/// Weights are laid out (out_channel, in_channel, kh, kw).
struct Conv2D {
  int kernel_h = 1;
  int kernel_w = 1;
  int in_channels = 1;
  int out_channels = 1;
  int stride = 1;
  Padding padding = Padding::Valid;
  std::vector<float> weights;
  std::vector<float> biases;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel_h * kernel_w;
  }
  friend bool operator==(const Conv2D&, const Conv2D&) = default;
};

struct MaxPool2D {
  int window_h = 2;
  int window_w = 2;
  int stride = 2;
  friend bool operator==(const MaxPool2D&, const MaxPool2D&) = default;
};

/// Weights are laid out (out, in), row-major. The input is read flat in the
/// tensor's (y, x, channel) order.
struct Dense {
  int in = 1;
  int out = 1;
  std::vector<float> weights;
  std::vector<float> biases;

  std::size_t weight_count() const { return static_cast<std::size_t>(in) * out; }
  friend bool operator==(const Dense&, const Dense&) = default;
};

struct ReLU {
  friend bool operator==(const ReLU&, const ReLU&) = default;
};
struct Flatten {
  friend bool operator==(const Flatten&, const Flatten&) = default;
};
struct Softmax {
  friend bool operator==(const Softmax&, const Softmax&) = default;
};

using Layer = std::variant<Conv2D, MaxPool2D, Dense, ReLU, Flatten, Softmax>;

/// Activation geometry between layers (height, width, channels; HWC storage).
struct TensorShape {
  int height = 1;
  int width = 1;
  int channels = 1;
  std::size_t size() const { return static_cast<std::size_t>(height) * width * channels; }
  std::string str() const;
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

/// A small feedforward classifier g_t together with its normalizer.
struct NetworkDefinition {
  ImageShape input;
  NormalizationScheme normalization;
  std::vector<Layer> layers;

  friend bool operator==(const NetworkDefinition&, const NetworkDefinition&) = default;
};

/// Checks that layer shapes compose, weight arrays match their declared
/// sizes and the last layer is Softmax. Returns the shape after each layer.
/// Throws ConfigError naming the offending layer.
std::vector<TensorShape> validate(const NetworkDefinition& net);

/// Real-domain forward pass (input already normalized).
ProbabilityVector forward_real(const NetworkDefinition& net, const RealImage& v);

/// Activations after the first `layers` layers, flat in (y, x, channel)
/// order, for an already-normalized input.
std::vector<double> forward_partial(const NetworkDefinition& net, const RealImage& v,
                                    std::size_t layers);

/// normalize, then forward_real. All arithmetic in double precision.
ProbabilityVector forward(const NetworkDefinition& net, const IntegerImage& d);

/// Weight file: text header, a `weights` line, then little-endian f32 payload.
NetworkDefinition load_network(const std::filesystem::path& path);
NetworkDefinition read_network(std::istream& in, const std::string& source = "<stream>");
void save_network(const NetworkDefinition& net, const std::filesystem::path& path);
void write_network(const NetworkDefinition& net, std::ostream& out);

/// Oracle backed by a validated NetworkDefinition.
class NetworkOracle : public RealInputClassifier {
 public:
  explicit NetworkOracle(NetworkDefinition net);

  ProbabilityVector predict(const IntegerImage& d) const override;
  ProbabilityVector predict_real(const RealImage& v) const override;
  std::size_t class_count() const override { return classes_; }
  ImageShape input_shape() const override { return net_.input; }
  const NormalizationScheme& normalization() const override { return net_.normalization; }
  const NetworkDefinition& definition() const { return net_; }

 private:
  NetworkDefinition net_;
  std::size_t classes_;
};

}  // namespace dfa

#endif  // DFA_NETWORK_HPP
