#pragma once

#include "mvpi/model.hpp"
#include "mvpi/sim.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace mvpi {

/// Everything one CLI invocation needs. Matrices in the JSON document are
/// row-major nested arrays; r and sigma are either a single value or
/// {"knots": [0, ..., T], "values": [...]}.
struct RunConfig {
    RawModel model;
    std::size_t grid_steps = 2000;
    SimConfig sim;
    std::optional<double> x_bar;      ///< target for simulate
    std::vector<double> targets;      ///< frontier sweep
    std::string out_dir = ".";
};

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

MatrixXd json_matrix(const nlohmann::json& node, const char* name);
VectorXd json_vector(const nlohmann::json& node, const char* name);

}  // namespace mvpi
