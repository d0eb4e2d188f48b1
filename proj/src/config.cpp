#include "mvpi/config.hpp"

#include "mvpi/error.hpp"

#include <fstream>
#include <sstream>

namespace mvpi {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

double json_number(const json& node, const char* name)
{
    if (!node.is_number()) bad(std::string(name) + " must be a number");
    return node.get<double>();
}

const json& required(const json& obj, const char* key)
{
    if (!obj.contains(key)) bad(std::string("missing key \"") + key + "\"");
    return obj.at(key);
}

template <class T, class Parse>
PiecewiseConstant<T> piecewise(const json& node, double horizon, const char* name, Parse parse)
{
    if (node.is_object()) {
        PiecewiseConstant<T> out;
        const json& knots = required(node, "knots");
        const json& values = required(node, "values");
        if (!knots.is_array() || !values.is_array())
            bad(std::string(name) + ": knots and values must be arrays");
        for (const json& k : knots) out.knots.push_back(json_number(k, name));
        for (const json& v : values) out.values.push_back(parse(v, name));
        return out;
    }
    return PiecewiseConstant<T>::constant(horizon, parse(node, name));
}

std::vector<double> number_list(const json& node, const char* name)
{
    if (!node.is_array()) bad(std::string(name) + " must be an array of numbers");
    std::vector<double> out;
    for (const json& v : node) out.push_back(json_number(v, name));
    return out;
}

}  // namespace

MatrixXd json_matrix(const json& node, const char* name)
{
    if (!node.is_array() || node.empty() || !node.front().is_array())
        bad(std::string(name) + " must be a non-empty array of rows");
    const std::size_t rows = node.size();
    const std::size_t cols = node.front().size();
    MatrixXd out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!node[i].is_array() || node[i].size() != cols)
            bad(std::string(name) + " has ragged rows");
        for (std::size_t j = 0; j < cols; ++j) out(i, j) = json_number(node[i][j], name);
    }
    return out;
}

VectorXd json_vector(const json& node, const char* name)
{
    const std::vector<double> v = number_list(node, name);
    if (v.empty()) bad(std::string(name) + " must not be empty");
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

RunConfig parse_run_config(const json& doc)
{
    if (!doc.is_object()) bad("config must be a JSON object");
    RunConfig cfg;

    const json& m = required(doc, "model");
    RawModel& raw = cfg.model;
    raw.horizon = json_number(required(m, "T"), "T");
    raw.rate = piecewise<double>(required(m, "r"), raw.horizon, "r",
                                 [](const json& v, const char* name) { return json_number(v, name); });
    raw.sigma = piecewise<MatrixXd>(required(m, "sigma"), raw.horizon, "sigma",
                                    [](const json& v, const char* name) { return json_matrix(v, name); });
    raw.a = json_vector(required(m, "a"), "a");
    raw.A = json_matrix(required(m, "A"), "A");
    raw.d = json_vector(required(m, "d"), "d");
    raw.D = json_matrix(required(m, "D"), "D");
    raw.Lambda = json_matrix(required(m, "Lambda"), "Lambda");
    raw.x0 = json_number(required(m, "x0"), "x0");
    raw.y0 = json_vector(required(m, "y0"), "y0");
    raw.s0 = m.contains("s0") ? json_number(m.at("s0"), "s0") : 1.0;
    raw.s = m.contains("s") ? json_vector(m.at("s"), "s") : VectorXd::Ones(raw.a.size());

    if (doc.contains("grid")) {
        const json& g = doc.at("grid");
        if (g.contains("steps")) {
            if (!g.at("steps").is_number_integer() || g.at("steps").get<long long>() < 1)
                bad("grid.steps must be a positive integer");
            cfg.grid_steps = g.at("steps").get<std::size_t>();
        }
    }

    cfg.sim.step = raw.horizon / static_cast<double>(cfg.grid_steps);
    if (doc.contains("sim")) {
        const json& s = doc.at("sim");
        if (s.contains("paths")) {
            if (!s.at("paths").is_number_integer() || s.at("paths").get<long long>() < 1)
                bad("sim.paths must be a positive integer");
            cfg.sim.paths = s.at("paths").get<std::size_t>();
        }
        if (s.contains("step")) cfg.sim.step = json_number(s.at("step"), "sim.step");
        if (s.contains("seed")) {
            if (!s.at("seed").is_number_unsigned()) bad("sim.seed must be a non-negative integer");
            cfg.sim.seed = s.at("seed").get<std::uint64_t>();
        }
        if (s.contains("brownian_refinement")) {
            if (!s.at("brownian_refinement").is_number_integer()
                || s.at("brownian_refinement").get<long long>() < 1)
                bad("sim.brownian_refinement must be a positive integer");
            cfg.sim.brownian_refinement = s.at("brownian_refinement").get<std::size_t>();
        }
        if (s.contains("checkpoints")) cfg.sim.checkpoints = number_list(s.at("checkpoints"), "sim.checkpoints");
        if (s.contains("x_bar")) cfg.x_bar = json_number(s.at("x_bar"), "sim.x_bar");
    }

    if (doc.contains("frontier")) {
        const json& f = doc.at("frontier");
        if (f.contains("targets")) cfg.targets = number_list(f.at("targets"), "frontier.targets");
    }
    if (doc.contains("output")) {
        const json& o = doc.at("output");
        if (o.contains("dir")) {
            if (!o.at("dir").is_string()) bad("output.dir must be a string");
            cfg.out_dir = o.at("dir").get<std::string>();
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) bad("cannot open config file " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        bad(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_run_config(doc);
}

}  // namespace mvpi
