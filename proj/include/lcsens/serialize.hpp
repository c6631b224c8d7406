#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>

#include "lcsens/fitter.hpp"
#include "lcsens/refit.hpp"
#include "lcsens/simulate.hpp"

namespace lcsens {

using json = nlohmann::ordered_json;

// FitResult document. Stable field names:
//   schema, model, correlated,
//   fixed.{theta,delta},
//   student.{dim,l11,l21,l22,sd_intercept,sd_slope,corr}, kc.{...},
//   blups.students[{id,theta,delta}], blups.kcs[{id,beta,gamma}], modes[],
//   deviance, aic, n_params, converged, singular, n_obs, n_students, n_kcs,
//   n_evaluations, notes[], config{...}
inline constexpr const char* kFitSchema = "lcsens.fit/1";

json to_json(const FitConfig& cfg);
FitConfig fit_config_from_json(const json& j);

json to_json(const FitResult& fit);
FitResult fit_result_from_json(const json& j);

/// Serialized with 17 significant digits so parsing restores every double bit-exactly.
std::string dump(const json& j);

json to_json(const EligibilityReport& e);
json to_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const json& j);
json to_json(const SimTruth& truth);
json to_json(const SignatureReport& rep);
json to_json(const FitSummary& s);

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace lcsens
