#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "predfilter/lstm.hpp"
#include "predfilter/train.hpp"

namespace predfilter {

inline constexpr int kWeightFormatVersion = 1;

/// Weight document:
///   {format_version, arch:{input, hidden, window}, norm:{mean, std},
///    params:{wi, wf, wg, wo, ui, uf, ug, uo, bi, bf, bg, bo, dense_w, dense_b},
///    metadata:{source_id, kind, seed}}
/// Matrices are arrays of rows (hidden rows each). Doubles are written as
/// shortest round-trip decimals, so load(save(w)) == w bit for bit.
nlohmann::json weights_to_json(const ModelWeights& w);

/// Throws InputError on a version mismatch, missing fields, or dimensions
/// that disagree with the declared architecture.
ModelWeights weights_from_json(const nlohmann::json& doc);

std::string serialize_weights(const ModelWeights& w);
ModelWeights deserialize_weights(std::string_view text);

void save_weights(const ModelWeights& w, const std::string& path);
ModelWeights load_weights(const std::string& path);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& doc);

nlohmann::json train_report_to_json(const TrainReport& r);

}  // namespace predfilter
