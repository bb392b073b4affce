#ifndef QUAYDECK_NN_CHECKPOINT_HPP_
#define QUAYDECK_NN_CHECKPOINT_HPP_

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "quaydeck/env.hpp"
#include "quaydeck/json_util.hpp"
#include "quaydeck/nn/network.hpp"

namespace quaydeck::nn {

inline constexpr const char* kCheckpointFormat = "quaydeck-ckpt/1";

/// Parameters plus everything needed to reproduce training-time behavior.
struct Checkpoint {
  PolicyParams params;
  FeatureScales feature_scales;
  std::array<double, 2> objective_scales{1.0, 1.0};
  OrderedJson meta = OrderedJson::object();  // free-form provenance (iteration, seed, ...)
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint blocks are little-endian f64");

inline OrderedJson dims_to_json(const NetDims& d) {
  return {{"feature_width", d.feature_width}, {"model", d.model}, {"heads", d.heads},
          {"pref_hidden", d.pref_hidden}, {"ln_eps", d.ln_eps}};
}

inline NetDims dims_from_json(const Json& j) {
  NetDims d;
  d.feature_width = quaydeck::detail::field<int>(j, "feature_width", "dims");
  d.model = quaydeck::detail::field<int>(j, "model", "dims");
  d.heads = quaydeck::detail::field<int>(j, "heads", "dims");
  d.pref_hidden = quaydeck::detail::field<int>(j, "pref_hidden", "dims");
  d.ln_eps = quaydeck::detail::field<double>(j, "ln_eps", "dims");
  return d;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  OrderedJson h;
  h["format"] = kCheckpointFormat;
  h["dims"] = detail::dims_to_json(ck.params.dims);
  h["fusion_mode"] = to_string(ck.params.fusion);
  h["feature_scales"] = {{"distance_m", ck.feature_scales.distance_m}, {"count", ck.feature_scales.count}};
  h["objective_scales"] = {ck.objective_scales[0], ck.objective_scales[1]};
  const auto layout = param_layout(ck.params.dims, ck.params.fusion);
  if (layout.size() != ck.params.tensors.size()) throw ShapeError("parameter set does not match its layout");
  OrderedJson tensors = OrderedJson::array();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (ck.params.tensors[i].shape != layout[i].shape) throw ShapeError("tensor " + layout[i].name + " has wrong shape");
    tensors.push_back({{"name", layout[i].name}, {"shape", layout[i].shape}});
  }
  h["tensors"] = tensors;
  h["meta"] = ck.meta;
  std::string out = h.dump() + "\n";
  for (const auto& t : ck.params.tensors) {
    t.check_finite("checkpoint tensor");
    const auto* bytes = reinterpret_cast<const char*>(t.values.data());
    out.append(bytes, t.values.size() * sizeof(double));
  }
  return out;
}

inline Checkpoint parse_checkpoint(const std::string& blob) {
  const auto nl = blob.find('\n');
  if (nl == std::string::npos) throw ParseError("header", "checkpoint header line missing");
  const Json h = quaydeck::detail::parse_document(blob.substr(0, nl), "checkpoint header");
  const auto format = quaydeck::detail::field<std::string>(h, "format", "");
  if (format != kCheckpointFormat) throw ParseError("format", "unsupported checkpoint format '" + format + "'");
  Checkpoint ck;
  const NetDims dims = detail::dims_from_json(quaydeck::detail::member(h, "dims", ""));
  const FusionMode mode = parse_fusion(quaydeck::detail::field<std::string>(h, "fusion_mode", ""));
  const auto& fs = quaydeck::detail::member(h, "feature_scales", "");
  ck.feature_scales.distance_m = quaydeck::detail::field<double>(fs, "distance_m", "feature_scales");
  ck.feature_scales.count = quaydeck::detail::field<double>(fs, "count", "feature_scales");
  const auto os = quaydeck::detail::field<std::vector<double>>(h, "objective_scales", "");
  if (os.size() != 2) throw ParseError("objective_scales", "expected two objective scales");
  ck.objective_scales = {os[0], os[1]};
  if (h.contains("meta")) ck.meta = OrderedJson::parse(h["meta"].dump());

  const auto layout = param_layout(dims, mode);
  const auto& listed = quaydeck::detail::member(h, "tensors", "");
  if (!listed.is_array() || listed.size() != layout.size())
    throw ShapeError("checkpoint lists " + std::to_string(listed.size()) + " tensors, layout needs " +
                     std::to_string(layout.size()));
  ck.params = zero_params(dims, mode);
  std::size_t pos = nl + 1;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto name = quaydeck::detail::field<std::string>(listed[i], "name", "tensors");
    const auto shape = quaydeck::detail::field<std::vector<int>>(listed[i], "shape", "tensors." + name);
    if (name != layout[i].name || shape != layout[i].shape)
      throw ShapeError("tensor " + name + " does not match the declared dims");
    auto& vals = ck.params.tensors[i].values;
    const std::size_t bytes = vals.size() * sizeof(double);
    if (pos + bytes > blob.size()) throw ShapeError("checkpoint truncated in tensor " + name);
    std::memcpy(vals.data(), blob.data() + pos, bytes);
    pos += bytes;
    ck.params.tensors[i].check_finite(name);
  }
  if (pos != blob.size()) throw ShapeError("checkpoint has trailing bytes");
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  quaydeck::detail::write_file(path, serialize_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(quaydeck::detail::read_file(path)); }

/// A checkpointed network acting as a dispatch rule.
class NetPolicy final : public DispatchPolicy {
 public:
  explicit NetPolicy(Checkpoint ck) : ck_(std::move(ck)) {}
  NetPolicy(PolicyParams params, FeatureScales scales) {
    ck_.params = std::move(params);
    ck_.feature_scales = scales;
  }

  std::vector<double> probabilities(const StateFeatures& f, const Preference& pref) const override {
    return forward(ck_.params, f, pref).record_probs(0);
  }
  FeatureScales scales_for(const TerminalInstance&) const override { return ck_.feature_scales; }

  const Checkpoint& checkpoint() const { return ck_; }
  const PolicyParams& params() const { return ck_.params; }

 private:
  Checkpoint ck_;
};

}  // namespace quaydeck::nn

#endif  // QUAYDECK_NN_CHECKPOINT_HPP_
