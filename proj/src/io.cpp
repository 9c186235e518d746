#include "bsmf/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace bsmf {

using nlohmann::json;

namespace {

Eigen::MatrixXd matrix_from_json(const json& rows) {
    if (!rows.is_array() || rows.empty())
        throw Error(ErrorCode::InvalidArgument, "expected a nonempty array of rows");
    const auto r = rows.size();
    const auto c = rows[0].size();
    Eigen::MatrixXd out(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        if (rows[i].size() != c)
            throw Error(ErrorCode::InvalidArgument, "ragged matrix rows in configuration");
        for (std::size_t j = 0; j < c; ++j) out(i, j) = rows[i][j].get<double>();
    }
    return out;
}

Eigen::VectorXd vector_from_json(const json& arr) {
    Eigen::VectorXd out(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) out[i] = arr[i].get<double>();
    return out;
}

json matrix_to_json(const Eigen::MatrixXd& mat) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < mat.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < mat.cols(); ++j) row.push_back(mat(i, j));
        rows.push_back(row);
    }
    return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

RateProfile profile_from_json(const json& spec) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& pt : spec.at("points"))
        pts.emplace_back(pt[0].get<double>(), pt[1].get<double>());
    std::string kind = spec.value("kind", "step");
    if (kind == "linear") return RateProfile::linear(std::move(pts));
    if (kind == "step") return RateProfile::step(std::move(pts));
    throw Error(ErrorCode::InvalidArgument, "profile kind must be 'step' or 'linear'");
}

DaySegmentation segmentation_from_json(const json& spec) {
    DaySegmentation seg;
    for (const auto& part : spec) {
        std::vector<HourInterval> ivs;
        for (const auto& iv : part) ivs.push_back({iv[0].get<double>(), iv[1].get<double>()});
        seg.segments.push_back(std::move(ivs));
    }
    seg.validate();
    return seg;
}

EnvironmentSpec env_from_json(const json& e, const std::filesystem::path& base_dir) {
    if (e.contains("file")) {
        std::filesystem::path p = e.at("file").get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        return load_environment(p);
    }
    EnvironmentSpec env;
    if (e.contains("build")) {
        const auto& b = e.at("build");
        DaySegmentation seg = b.contains("segments")
                                  ? segmentation_from_json(b.at("segments"))
                                  : DaySegmentation::seven_part_day();
        double scale = b.value("time_scale", 1.0);
        if (seg.size() == 1) {
            env = EnvironmentSpec::single_state(0.0, 0.0);
        } else {
            env = build_cyclic_generator(seg, scale);
        }
        if (b.contains("rent_profile") && b.contains("return_profile")) {
            auto [lam, mu] = average_rates(profile_from_json(b.at("rent_profile")),
                                           profile_from_json(b.at("return_profile")), seg);
            env.lambda = lam;
            env.mu = mu;
        }
    } else {
        env.m = static_cast<int>(e.at("W").size());
        env.W = matrix_from_json(e.at("W"));
        env.theta = stationary_vector(env.W);
        env.lambda = Eigen::VectorXd::Zero(env.m);
        env.mu = Eigen::VectorXd::Zero(env.m);
    }
    if (e.contains("lambda")) env.lambda = vector_from_json(e.at("lambda"));
    if (e.contains("mu")) env.mu = vector_from_json(e.at("mu"));
    env.validate();
    return env;
}

} // namespace

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::InvalidArgument, "cannot open config: " + path.string());
    json doc = json::parse(in);

    ExperimentConfig cfg;
    const auto base_dir = path.has_parent_path() ? path.parent_path()
                                                 : std::filesystem::path(".");

    const auto& model = doc.at("model");
    cfg.model.K = model.at("K").get<int>();
    cfg.model.C = model.at("C").get<int>();
    cfg.model.L = model.at("L").get<int>();
    cfg.model.alpha = model.at("alpha").get<double>();
    cfg.model.beta = model.at("beta").get<double>();
    cfg.model.env = env_from_json(model.at("env"), base_dir);
    cfg.model.validate();

    if (doc.contains("solver")) {
        const auto& s = doc.at("solver");
        cfg.mode = assembly_mode_from_string(s.value("mode", "standard"));
        cfg.solver.damping = s.value("damping", cfg.solver.damping);
        cfg.solver.tol = s.value("tol", cfg.solver.tol);
        cfg.solver.max_iter = s.value("max_iter", cfg.solver.max_iter);
        std::string init = s.value("init", "level-c");
        if (init == "uniform")
            cfg.solver.init = FixedPointOptions::Init::Uniform;
        else if (init == "level-c")
            cfg.solver.init = FixedPointOptions::Init::LevelC;
        else
            throw Error(ErrorCode::InvalidArgument, "solver init must be 'level-c' or 'uniform'");
    }

    if (doc.contains("ode")) {
        const auto& o = doc.at("ode");
        cfg.ode_t_end = o.value("t_end", cfg.ode_t_end);
        cfg.ode_outputs = o.value("outputs", cfg.ode_outputs);
        if (o.contains("n") && !o.at("n").is_null())
            cfg.ode_n = o.at("n").get<std::int64_t>();
        cfg.ode_ctrl.abs_tol = o.value("abs_tol", cfg.ode_ctrl.abs_tol);
        cfg.ode_ctrl.rel_tol = o.value("rel_tol", cfg.ode_ctrl.rel_tol);
        cfg.steady.tol = o.value("steady_tol", cfg.steady.tol);
        cfg.steady.t_max = o.value("t_max", cfg.steady.t_max);
        cfg.steady.ctrl = cfg.ode_ctrl;
    }

    if (doc.contains("sim")) {
        const auto& s = doc.at("sim");
        cfg.sim.N = s.value("N", cfg.sim.N);
        cfg.sim.horizon = s.value("horizon", cfg.sim.horizon);
        cfg.sim.seed = s.value("seed", cfg.sim.seed);
        cfg.sim.mode = sim_mode_from_string(s.value("mode", "physical"));
        cfg.sim.sample_dt = s.value("sample_dt", cfg.sim.sample_dt);
        cfg.sim.burn_in_frac = s.value("burn_in_frac", cfg.sim.burn_in_frac);
        if (s.contains("initial_level"))
            cfg.sim.initial_level = s.at("initial_level").get<int>();
        if (s.contains("max_events"))
            cfg.sim.max_events = s.at("max_events").get<std::int64_t>();
    }

    if (doc.contains("sweep")) {
        const auto& s = doc.at("sweep");
        for (const auto& axis : s.at("axes")) {
            SweepAxis a;
            a.param = axis.at("param").get<std::string>();
            for (const auto& v : axis.at("values")) a.values.push_back(v.get<double>());
            if (a.values.empty())
                throw Error(ErrorCode::InvalidArgument, "sweep axis with no values");
            cfg.axes.push_back(std::move(a));
        }
        cfg.sweep_efficiency_ratio = s.value("efficiency_ratio", false);
    }

    if (doc.contains("compare")) {
        const auto& c = doc.at("compare");
        if (c.contains("n_list"))
            for (const auto& v : c.at("n_list"))
                cfg.compare_n_list.push_back(v.get<std::int64_t>());
    }

    if (doc.contains("output")) {
        const auto& o = doc.at("output");
        if (o.contains("dir")) cfg.out_dir = o.at("dir").get<std::string>();
        cfg.plots = o.value("plots", false);
        cfg.threads = o.value("threads", 0);
    }

    cfg.echo = doc.dump();
    return cfg;
}

void save_environment(const EnvironmentSpec& env, const std::filesystem::path& path) {
    json doc;
    doc["version"] = kToolVersion;
    doc["m"] = env.m;
    doc["W"] = matrix_to_json(env.W);
    doc["theta"] = vector_to_json(env.theta);
    doc["lambda"] = vector_to_json(env.lambda);
    doc["mu"] = vector_to_json(env.mu);
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::InvalidArgument, "cannot write: " + path.string());
    out << doc.dump(2) << "\n";
}

EnvironmentSpec load_environment(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::InvalidArgument, "cannot open environment file: " + path.string());
    json doc = json::parse(in);
    EnvironmentSpec env;
    env.m = doc.at("m").get<int>();
    env.W = matrix_from_json(doc.at("W"));
    env.theta = doc.contains("theta") ? vector_from_json(doc.at("theta"))
                                      : stationary_vector(env.W);
    env.lambda = vector_from_json(doc.at("lambda"));
    env.mu = vector_from_json(doc.at("mu"));
    env.validate();
    return env;
}

std::string metadata_header(const std::string& config_echo) {
    std::ostringstream out;
    out << "# " << kToolVersion << "\n";
    if (!config_echo.empty()) out << "# config: " << config_echo << "\n";
    return out.str();
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const std::filesystem::path& path, const std::string& header_comment,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::InvalidArgument, "cannot write: " + path.string());
    out << header_comment;
    for (std::size_t i = 0; i < columns.size(); ++i)
        out << columns[i] << (i + 1 < columns.size() ? "," : "\n");
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << row[i] << (i + 1 < row.size() ? "," : "\n");
    }
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& mat,
                      const std::string& header_comment) {
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::InvalidArgument, "cannot write: " + path.string());
    out << header_comment;
    for (Eigen::Index i = 0; i < mat.rows(); ++i)
        for (Eigen::Index j = 0; j < mat.cols(); ++j)
            out << format_double(mat(i, j)) << (j + 1 < mat.cols() ? "," : "\n");
}

void write_fixed_point_csv(const std::filesystem::path& path, const FixedPoint& fp,
                           const ModelParams& p, const std::string& header_comment) {
    std::vector<std::vector<std::string>> rows;
    for (int k = p.floor_level(); k <= p.ceiling_level(); ++k)
        for (int j = 0; j < p.env.m; ++j)
            rows.push_back({std::to_string(k), std::to_string(j + 1),
                            format_double(fp.pi(k, j))});
    std::ostringstream extra;
    extra << header_comment << "# residual: " << format_double(fp.residual)
          << " iterations: " << fp.iterations << " converged: " << (fp.converged ? 1 : 0)
          << " mode: " << to_string(fp.mode) << "\n";
    write_csv(path, extra.str(), {"level", "env_state", "probability"}, rows);
}

void write_fixed_point_json(const std::filesystem::path& path, const FixedPoint& fp,
                            const ModelParams& p) {
    json doc;
    doc["version"] = kToolVersion;
    doc["mode"] = to_string(fp.mode);
    doc["residual"] = fp.residual;
    doc["iterations"] = fp.iterations;
    doc["converged"] = fp.converged;
    doc["clamp_events"] = fp.clamp_events;
    doc["floor_level"] = p.floor_level();
    json blocks = json::array();
    for (int k = p.floor_level(); k <= p.ceiling_level(); ++k) {
        json block = json::array();
        for (int j = 0; j < p.env.m; ++j) block.push_back(fp.pi(k, j));
        blocks.push_back(block);
    }
    doc["pi"] = blocks;
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::InvalidArgument, "cannot write: " + path.string());
    out << doc.dump(2) << "\n";
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                          const ModelParams& p, const std::string& header_comment) {
    std::vector<std::string> cols{"t"};
    for (int k = p.floor_level(); k <= p.ceiling_level(); ++k)
        for (int j = 0; j < p.env.m; ++j)
            cols.push_back("y_" + std::to_string(k) + "_" + std::to_string(j + 1));
    std::vector<std::vector<std::string>> rows;
    rows.reserve(traj.times.size());
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        std::vector<std::string> row{format_double(traj.times[i])};
        const auto& y = traj.states[i];
        for (int k = p.floor_level(); k <= p.ceiling_level(); ++k)
            for (int j = 0; j < p.env.m; ++j) row.push_back(format_double(y(k, j)));
        rows.push_back(std::move(row));
    }
    write_csv(path, header_comment, cols, rows);
}

void write_sim_csv(const std::filesystem::path& path, const SimResult& sim,
                   const ModelParams& p, const std::string& header_comment) {
    std::ostringstream extra;
    extra << header_comment << "# mode: " << to_string(sim.mode) << " N: " << sim.N
          << " seed: " << sim.seed << " events: " << sim.events
          << " elapsed: " << format_double(sim.elapsed)
          << " burn_in: " << format_double(sim.burn_in)
          << " clamp_events: " << sim.clamp_events << "\n";

    std::vector<std::string> cols{"t"};
    for (int k = p.floor_level(); k <= p.ceiling_level(); ++k)
        for (int j = 0; j < p.env.m; ++j)
            cols.push_back("Y_" + std::to_string(k) + "_" + std::to_string(j + 1));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < sim.sample_times.size(); ++i) {
        std::vector<std::string> row{format_double(sim.sample_times[i])};
        const auto& s = sim.samples[i];
        for (Eigen::Index k = 0; k < s.rows(); ++k)
            for (Eigen::Index j = 0; j < s.cols(); ++j) row.push_back(format_double(s(k, j)));
        rows.push_back(std::move(row));
    }
    // time-averaged row keyed by t = -1
    std::vector<std::string> avg{"-1"};
    for (Eigen::Index k = 0; k < sim.time_avg.rows(); ++k)
        for (Eigen::Index j = 0; j < sim.time_avg.cols(); ++j)
            avg.push_back(format_double(sim.time_avg(k, j)));
    rows.push_back(std::move(avg));
    write_csv(path, extra.str(), cols, rows);
}

} // namespace bsmf
