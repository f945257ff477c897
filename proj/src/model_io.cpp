#include "predfilter/model_io.hpp"

#include <cmath>
#include <set>

#include "predfilter/error.hpp"
#include "predfilter/text.hpp"

namespace predfilter {

using nlohmann::json;

namespace {

constexpr const char* kGateSuffix[] = {"i", "f", "g", "o"};
constexpr Gate kGates[] = {Gate::input, Gate::forget, Gate::cell, Gate::output};

json matrix_to_json(std::span<const double> m, std::size_t rows, std::size_t cols) {
  json out = json::array();
  for (std::size_t r = 0; r < rows; ++r) {
    out.push_back(std::vector<double>(m.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                      m.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)));
  }
  return out;
}

void vector_from_json(const json& j, std::span<double> out, const std::string& name) {
  if (!j.is_array() || j.size() != out.size()) {
    throw InputError("weight field '" + name + "' has " +
                     std::to_string(j.is_array() ? j.size() : 0) +
                     " entries, expected " + std::to_string(out.size()));
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!j[i].is_number()) {
      throw InputError("weight field '" + name + "' holds a non-number");
    }
    out[i] = j[i].get<double>();
  }
}

void matrix_from_json(const json& j, std::span<double> out, std::size_t rows,
                      std::size_t cols, const std::string& name) {
  if (!j.is_array() || j.size() != rows) {
    throw InputError("weight matrix '" + name + "' has " +
                     std::to_string(j.is_array() ? j.size() : 0) +
                     " rows, expected " + std::to_string(rows));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    vector_from_json(j[r], out.subspan(r * cols, cols),
                     name + "[" + std::to_string(r) + "]");
  }
}

const json& field(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw InputError(std::string("weight file is missing field '") + key + "'");
  }
  return doc.at(key);
}

std::size_t positive_size(const json& j, const char* name) {
  if (!j.is_number_integer() || j.get<std::int64_t>() <= 0) {
    throw InputError(std::string("architecture field '") + name +
                     "' must be a positive integer");
  }
  return j.get<std::size_t>();
}

}  // namespace

json weights_to_json(const ModelWeights& w) {
  const auto& p = w.params;
  const std::size_t H = p.hidden_size();
  const std::size_t I = p.input_size();
  json params = json::object();
  for (std::size_t gi = 0; gi < 4; ++gi) {
    params[std::string("w") + kGateSuffix[gi]] = matrix_to_json(p.input_weights(kGates[gi]), H, I);
    params[std::string("u") + kGateSuffix[gi]] =
        matrix_to_json(p.recurrent_weights(kGates[gi]), H, H);
    const auto b = p.bias(kGates[gi]);
    params[std::string("b") + kGateSuffix[gi]] = std::vector<double>(b.begin(), b.end());
  }
  const auto dw = p.dense_weights();
  params["dense_w"] = std::vector<double>(dw.begin(), dw.end());
  params["dense_b"] = p.dense_bias();

  return json{
      {"format_version", kWeightFormatVersion},
      {"arch", {{"input", I}, {"hidden", H}, {"window", p.window()}}},
      {"norm", {{"mean", w.norm.mean}, {"std", w.norm.std}}},
      {"params", std::move(params)},
      {"metadata",
       {{"source_id", w.metadata.source_id},
        {"kind", std::string(to_string(w.metadata.kind))},
        {"seed", w.metadata.seed}}},
  };
}

ModelWeights weights_from_json(const json& doc) {
  const json& version = field(doc, "format_version");
  if (!version.is_number_integer()) throw InputError("format_version must be an integer");
  if (version.get<std::int64_t>() != kWeightFormatVersion) {
    throw InputError("unsupported weight format version " +
                     std::to_string(version.get<std::int64_t>()) + " (this build reads " +
                     std::to_string(kWeightFormatVersion) + ")");
  }
  const json& arch = field(doc, "arch");
  const std::size_t I = positive_size(field(arch, "input"), "input");
  const std::size_t H = positive_size(field(arch, "hidden"), "hidden");
  const std::size_t K = positive_size(field(arch, "window"), "window");

  ModelWeights w;
  w.params = LstmParams(I, H, K);
  const json& params = field(doc, "params");
  for (std::size_t gi = 0; gi < 4; ++gi) {
    const std::string wn = std::string("w") + kGateSuffix[gi];
    const std::string un = std::string("u") + kGateSuffix[gi];
    const std::string bn = std::string("b") + kGateSuffix[gi];
    matrix_from_json(field(params, wn.c_str()), w.params.input_weights(kGates[gi]), H, I, wn);
    matrix_from_json(field(params, un.c_str()), w.params.recurrent_weights(kGates[gi]), H, H,
                     un);
    vector_from_json(field(params, bn.c_str()), w.params.bias(kGates[gi]), bn);
  }
  vector_from_json(field(params, "dense_w"), w.params.dense_weights(), "dense_w");
  const json& db = field(params, "dense_b");
  if (!db.is_number()) throw InputError("dense_b must be a number");
  w.params.dense_bias() = db.get<double>();
  if (!w.params.all_finite()) throw InputError("weight file holds non-finite parameters");

  const json& norm = field(doc, "norm");
  const json& mean = field(norm, "mean");
  const json& std = field(norm, "std");
  if (!mean.is_number() || !std.is_number()) throw InputError("norm stats must be numbers");
  w.norm = {mean.get<double>(), std.get<double>()};
  if (!std::isfinite(w.norm.mean) || !(w.norm.std > 0.0) || !std::isfinite(w.norm.std)) {
    throw InputError("weight file norm stats invalid (std must be positive)");
  }

  const json& meta = field(doc, "metadata");
  w.metadata.source_id = field(meta, "source_id").get<std::string>();
  w.metadata.kind = parse_source_kind(field(meta, "kind").get<std::string>());
  w.metadata.seed = field(meta, "seed").get<std::uint64_t>();
  return w;
}

std::string serialize_weights(const ModelWeights& w) {
  return weights_to_json(w).dump(1) + "\n";
}

ModelWeights deserialize_weights(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("corrupted weight file: ") + e.what());
  }
  try {
    return weights_from_json(doc);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed weight file: ") + e.what());
  }
}

void save_weights(const ModelWeights& w, const std::string& path) {
  text::write_file_atomic(path, serialize_weights(w));
}

ModelWeights load_weights(const std::string& path) {
  return deserialize_weights(text::read_file(path));
}

json train_config_to_json(const TrainConfig& c) {
  return json{{"hidden", c.hidden},
              {"lr", c.lr},
              {"batch_size", c.batch_size},
              {"max_epochs", c.max_epochs},
              {"dropout", c.dropout},
              {"patience_stop", c.patience_stop},
              {"patience_decay", c.patience_decay},
              {"decay_factor", c.decay_factor},
              {"min_lr", c.min_lr},
              {"seed", c.seed},
              {"val_frac", c.val_frac}};
}

TrainConfig train_config_from_json(const json& doc) {
  if (!doc.is_object()) throw InputError("training config must be a JSON object");
  static const std::set<std::string> known = {
      "hidden", "lr", "batch_size", "max_epochs", "dropout", "patience_stop",
      "patience_decay", "decay_factor", "min_lr", "seed", "val_frac"};
  for (const auto& [key, _] : doc.items()) {
    if (!known.count(key)) throw InputError("unknown training config key '" + key + "'");
  }
  TrainConfig c;
  try {
    c.hidden = doc.value("hidden", c.hidden);
    c.lr = doc.value("lr", c.lr);
    c.batch_size = doc.value("batch_size", c.batch_size);
    c.max_epochs = doc.value("max_epochs", c.max_epochs);
    c.dropout = doc.value("dropout", c.dropout);
    c.patience_stop = doc.value("patience_stop", c.patience_stop);
    c.patience_decay = doc.value("patience_decay", c.patience_decay);
    c.decay_factor = doc.value("decay_factor", c.decay_factor);
    c.min_lr = doc.value("min_lr", c.min_lr);
    c.seed = doc.value("seed", c.seed);
    c.val_frac = doc.value("val_frac", c.val_frac);
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid training config: ") + e.what());
  }
  c.validate();
  return c;
}

json train_report_to_json(const TrainReport& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_mse", e.train_mse},
                      {"val_mse", e.val_mse},
                      {"lr", e.lr}});
  }
  return json{{"initial_val_mse", r.initial_val_mse},
              {"epochs", std::move(epochs)},
              {"stopped_epoch", r.stopped_epoch},
              {"best_epoch", r.best_epoch},
              {"best_val_mse", r.best_val_mse},
              {"final_lr", r.final_lr},
              {"early_stopped", r.early_stopped}};
}

}  // namespace predfilter
