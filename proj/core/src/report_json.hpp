#pragma once

#include "delayscape/geodesic.hpp"
#include "json_canonical.hpp"

namespace delayscape::detail {

Json to_json_value(const geodesic::LinearFit& fit);
Json to_json_value(const geodesic::PredictorReport& report);
Json to_json_value(const geodesic::StabilityReport& report);

geodesic::LinearFit linear_fit_from_json(const Json& j, const std::string& pointer);
geodesic::PredictorReport predictor_report_from_json(const Json& j, const std::string& pointer);
geodesic::StabilityReport stability_report_from_json(const Json& j, const std::string& pointer);

}  // namespace delayscape::detail
