#pragma once

#include <string>

#include <json.hpp>

#include "ppt/gpr.hpp"
#include "ppt/pipeline.hpp"
#include "ppt/sim.hpp"

namespace ppt {

using json = nlohmann::json;

inline constexpr int kReportSchema = 1;

/// Fields common to every report: schema, version, command, config echo,
/// seed and timing.
json report_header(const std::string& command, const json& config, std::uint64_t seed, double seconds);

json test_report_json(const PipelineResult& res, const Dataset& ds, StatKind stat, const json& config,
                      double seconds);

json fit_report_json(const ModelFit& fit, const KernelSpec& kernel, const Dataset& ds, const json& config,
                     double seconds);

json study_summary_json(const ScenarioSpec& spec, const StudyResult& res, const json& config, std::uint64_t seed);

/// Serialized form used for every report file; stable under parse and
/// re-dump.
std::string dump_report(const json& j);

json kernel_json(const KernelSpec& k);

}  // namespace ppt
