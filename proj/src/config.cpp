#include "racebo/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "racebo/csv.hpp"

namespace racebo {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

IniFile IniFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

IniFile IniFile::parse(const std::string& text) {
    IniFile ini;
    std::stringstream ss(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const size_t comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("malformed section at line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            ini.sections_[section];
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("expected key=value at line " + std::to_string(lineno));
        ini.sections_[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return ini;
}

bool IniFile::has(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) > 0;
}

double IniFile::get_double(const std::string& section, const std::string& key,
                           double fallback) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return fallback;
    auto kv = it->second.find(key);
    if (kv == it->second.end()) return fallback;
    return std::stod(kv->second);
}

int IniFile::get_int(const std::string& section, const std::string& key, int fallback) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return fallback;
    auto kv = it->second.find(key);
    if (kv == it->second.end()) return fallback;
    return std::stoi(kv->second);
}

std::string IniFile::get_string(const std::string& section, const std::string& key,
                                const std::string& fallback) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return fallback;
    auto kv = it->second.find(key);
    if (kv == it->second.end()) return fallback;
    return kv->second;
}

Config Config::defaults() { return Config{}; }

Config Config::from_file(const std::string& path) { return from_ini(IniFile::load(path)); }

Config Config::from_ini(const IniFile& ini) {
    Config c;
    auto& v = c.nominal;
    v.m = ini.get_double("vehicle", "m", v.m);
    v.iz = ini.get_double("vehicle", "iz", v.iz);
    v.lf = ini.get_double("vehicle", "lf", v.lf);
    v.lr = ini.get_double("vehicle", "lr", v.lr);
    v.bf = ini.get_double("vehicle", "bf", v.bf);
    v.cf = ini.get_double("vehicle", "cf", v.cf);
    v.df = ini.get_double("vehicle", "df", v.df);
    v.br = ini.get_double("vehicle", "br", v.br);
    v.cr = ini.get_double("vehicle", "cr", v.cr);
    v.dr = ini.get_double("vehicle", "dr", v.dr);
    v.cm1 = ini.get_double("vehicle", "cm1", v.cm1);
    v.cm2 = ini.get_double("vehicle", "cm2", v.cm2);
    v.cr0 = ini.get_double("vehicle", "cr0", v.cr0);
    v.cr2 = ini.get_double("vehicle", "cr2", v.cr2);
    v.delta_max = ini.get_double("vehicle", "delta_max", v.delta_max);
    v.v_blend = ini.get_double("vehicle", "v_blend", v.v_blend);
    if (!v.valid()) throw std::runtime_error("invalid vehicle parameters in config");

    c.plant_noise.vx = ini.get_double("plant", "noise_vx", c.plant_noise.vx);
    c.plant_noise.vy = ini.get_double("plant", "noise_vy", c.plant_noise.vy);
    c.plant_noise.omega = ini.get_double("plant", "noise_omega", c.plant_noise.omega);

    c.meas_noise.px = ini.get_double("measurement", "noise_px", c.meas_noise.px);
    c.meas_noise.py = ini.get_double("measurement", "noise_py", c.meas_noise.py);
    c.meas_noise.psi = ini.get_double("measurement", "noise_psi", c.meas_noise.psi);

    auto& e = c.ekf;
    e.q_pos = ini.get_double("ekf", "q_pos", e.q_pos);
    e.q_psi = ini.get_double("ekf", "q_psi", e.q_psi);
    e.q_vx = ini.get_double("ekf", "q_vx", e.q_vx);
    e.q_vy = ini.get_double("ekf", "q_vy", e.q_vy);
    e.q_omega = ini.get_double("ekf", "q_omega", e.q_omega);
    e.r_pos = ini.get_double("ekf", "r_pos", e.r_pos);
    e.r_psi = ini.get_double("ekf", "r_psi", e.r_psi);
    e.init_var_pos = ini.get_double("ekf", "init_var_pos", e.init_var_pos);
    e.init_var_psi = ini.get_double("ekf", "init_var_psi", e.init_var_psi);
    e.init_var_v = ini.get_double("ekf", "init_var_v", e.init_var_v);
    e.init_var_omega = ini.get_double("ekf", "init_var_omega", e.init_var_omega);
    e.fd_step = ini.get_double("ekf", "fd_step", e.fd_step);

    auto& m = c.mpcc;
    m.horizon = ini.get_int("mpcc", "horizon", m.horizon);
    m.dt = ini.get_double("mpcc", "dt", m.dt);
    m.q_lag = ini.get_double("mpcc", "q_lag", m.q_lag);
    m.gamma_min = ini.get_double("mpcc", "gamma_min", m.gamma_min);
    m.gamma_max = ini.get_double("mpcc", "gamma_max", m.gamma_max);
    m.slack_weight_factor = ini.get_double("mpcc", "slack_weight_factor", m.slack_weight_factor);
    m.boundary_margin = ini.get_double("mpcc", "boundary_margin", m.boundary_margin);
    m.rate_delta = ini.get_double("mpcc", "rate_delta", m.rate_delta);
    m.rate_tau = ini.get_double("mpcc", "rate_tau", m.rate_tau);
    m.rate_gamma = ini.get_double("mpcc", "rate_gamma", m.rate_gamma);
    m.levenberg = ini.get_double("mpcc", "levenberg", m.levenberg);
    m.sqp_iters = ini.get_int("mpcc", "sqp_iters", m.sqp_iters);
    m.sqp_iters_cold = ini.get_int("mpcc", "sqp_iters_cold", m.sqp_iters_cold);
    m.trust_delta = ini.get_double("mpcc", "trust_delta", m.trust_delta);
    m.trust_tau = ini.get_double("mpcc", "trust_tau", m.trust_tau);
    m.trust_gamma = ini.get_double("mpcc", "trust_gamma", m.trust_gamma);

    auto& d = c.domain;
    d.q_cont_min = ini.get_double("tuning_domain", "q_cont_min", d.q_cont_min);
    d.q_cont_max = ini.get_double("tuning_domain", "q_cont_max", d.q_cont_max);
    d.q_adv_min = ini.get_double("tuning_domain", "q_adv_min", d.q_adv_min);
    d.q_adv_max = ini.get_double("tuning_domain", "q_adv_max", d.q_adv_max);

    auto& b = c.bo;
    b.beta = ini.get_double("bo", "beta", b.beta);
    b.grid_n = ini.get_int("bo", "grid_n", b.grid_n);
    b.sobol_init = ini.get_int("bo", "sobol_init", b.sobol_init);
    b.penalty_factor = ini.get_double("bo", "penalty_factor", b.penalty_factor);
    b.penalty_fallback = ini.get_double("bo", "penalty_fallback", b.penalty_fallback);
    b.noise_floor_var = ini.get_double("bo", "noise_floor_var", b.noise_floor_var);
    b.lengthscale_theta_min = ini.get_double("bo", "lengthscale_theta_min", b.lengthscale_theta_min);
    b.lengthscale_theta_max = ini.get_double("bo", "lengthscale_theta_max", b.lengthscale_theta_max);
    b.lengthscale_ctx_min = ini.get_double("bo", "lengthscale_ctx_min", b.lengthscale_ctx_min);
    b.lengthscale_ctx_max = ini.get_double("bo", "lengthscale_ctx_max", b.lengthscale_ctx_max);

    c.residual.prior_precision =
        ini.get_double("residual", "prior_precision", c.residual.prior_precision);
    c.residual.sg_window = ini.get_int("residual", "sg_window", c.residual.sg_window);
    c.residual.sg_order = ini.get_int("residual", "sg_order", c.residual.sg_order);

    c.lap.timeout = ini.get_double("lap", "timeout", c.lap.timeout);
    c.lap.max_solver_failures =
        ini.get_int("lap", "max_solver_failures", c.lap.max_solver_failures);
    c.lap.offtrack_abort = ini.get_double("lap", "offtrack_abort", c.lap.offtrack_abort);

    c.objective.lambda = ini.get_double("objective", "lambda", c.objective.lambda);

    auto& x = c.experiments;
    x.collect_q_cont = ini.get_double("experiments", "collect_q_cont", x.collect_q_cont);
    x.collect_q_adv = ini.get_double("experiments", "collect_q_adv", x.collect_q_adv);
    x.collect_gamma_max =
        ini.get_double("experiments", "collect_gamma_max", x.collect_gamma_max);
    x.detuned_q_cont = ini.get_double("experiments", "detuned_q_cont", x.detuned_q_cont);
    x.detuned_q_adv = ini.get_double("experiments", "detuned_q_adv", x.detuned_q_adv);
    x.tuned_q_cont = ini.get_double("experiments", "tuned_q_cont", x.tuned_q_cont);
    x.tuned_q_adv = ini.get_double("experiments", "tuned_q_adv", x.tuned_q_adv);
    x.table1_pool_laps = ini.get_int("experiments", "table1_pool_laps", x.table1_pool_laps);
    x.table1_resamples = ini.get_int("experiments", "table1_resamples", x.table1_resamples);
    x.table1_gp_subsample =
        ini.get_int("experiments", "table1_gp_subsample", x.table1_gp_subsample);
    x.cluster_laps = ini.get_int("experiments", "cluster_laps", x.cluster_laps);
    x.three_settings_laps =
        ini.get_int("experiments", "three_settings_laps", x.three_settings_laps);
    x.fig5_sobol = ini.get_int("experiments", "fig5_sobol", x.fig5_sobol);
    x.fig5_ucb = ini.get_int("experiments", "fig5_ucb", x.fig5_ucb);
    x.fig7_iters = ini.get_int("experiments", "fig7_iters", x.fig7_iters);
    x.fig7_seeds = ini.get_int("experiments", "fig7_seeds", x.fig7_seeds);
    x.three_settings_scenario =
        ini.get_string("experiments", "three_settings_scenario", x.three_settings_scenario);
    x.table1_scenario = ini.get_string("experiments", "table1_scenario", x.table1_scenario);
    return c;
}

ScenarioDef Config::scenario(const std::string& name) const {
    ScenarioDef s;
    s.name = name;
    s.true_params = nominal;
    if (name == "nominal") {
        s.description = "plant identical to the nominal model";
    } else if (name == "heavy") {
        s.description = "nominal car with 30% extra mass (inertia scaled proportionally)";
        s.true_params.m *= 1.3;
        s.true_params.iz *= 1.3;
    } else if (name == "car2") {
        s.description = "second car: CoG shifted 10% rearward, 28% less tire grip";
        s.true_params.lf *= 0.9;
        s.true_params.lr *= 1.1;
        s.true_params.df *= 0.72;
        s.true_params.dr *= 0.72;
    } else if (name == "car2_heavy") {
        s.description = "second car with 30% extra mass";
        s.true_params.lf *= 0.9;
        s.true_params.lr *= 1.1;
        s.true_params.df *= 0.72;
        s.true_params.dr *= 0.72;
        s.true_params.m *= 1.3;
        s.true_params.iz *= 1.3;
    } else {
        throw std::runtime_error("unknown scenario: " + name);
    }
    return s;
}

std::vector<std::string> Config::scenario_names() const {
    return {"nominal", "heavy", "car2", "car2_heavy"};
}

std::string Config::serialize() const {
    std::ostringstream os;
    auto put = [&os](const char* k, double v) { os << k << '=' << format_double(v) << '\n'; };
    const auto& v = nominal;
    put("m", v.m); put("iz", v.iz); put("lf", v.lf); put("lr", v.lr);
    put("bf", v.bf); put("cf", v.cf); put("df", v.df);
    put("br", v.br); put("cr", v.cr); put("dr", v.dr);
    put("cm1", v.cm1); put("cm2", v.cm2); put("cr0", v.cr0); put("cr2", v.cr2);
    put("delta_max", v.delta_max); put("v_blend", v.v_blend);
    put("pn_vx", plant_noise.vx); put("pn_vy", plant_noise.vy); put("pn_om", plant_noise.omega);
    put("mn_px", meas_noise.px); put("mn_py", meas_noise.py); put("mn_psi", meas_noise.psi);
    put("ekf_q_pos", ekf.q_pos); put("ekf_q_psi", ekf.q_psi);
    put("ekf_q_vx", ekf.q_vx); put("ekf_q_vy", ekf.q_vy); put("ekf_q_om", ekf.q_omega);
    put("ekf_r_pos", ekf.r_pos); put("ekf_r_psi", ekf.r_psi);
    put("ekf_iv_pos", ekf.init_var_pos); put("ekf_iv_psi", ekf.init_var_psi);
    put("ekf_iv_v", ekf.init_var_v); put("ekf_iv_om", ekf.init_var_omega);
    put("ekf_fd", ekf.fd_step);
    put("H", mpcc.horizon); put("dt", mpcc.dt); put("q_lag", mpcc.q_lag);
    put("gmin", mpcc.gamma_min); put("gmax", mpcc.gamma_max);
    put("slackf", mpcc.slack_weight_factor); put("bmargin", mpcc.boundary_margin);
    put("rd", mpcc.rate_delta); put("rt", mpcc.rate_tau); put("rg", mpcc.rate_gamma);
    put("lev", mpcc.levenberg); put("sqp", mpcc.sqp_iters); put("sqpc", mpcc.sqp_iters_cold);
    put("trd", mpcc.trust_delta); put("trt", mpcc.trust_tau); put("trg", mpcc.trust_gamma);
    put("qc0", domain.q_cont_min); put("qc1", domain.q_cont_max);
    put("qa0", domain.q_adv_min); put("qa1", domain.q_adv_max);
    put("beta", bo.beta); put("grid", bo.grid_n); put("sobol", bo.sobol_init);
    put("pf", bo.penalty_factor); put("pfb", bo.penalty_fallback);
    put("nf", bo.noise_floor_var);
    put("lt0", bo.lengthscale_theta_min); put("lt1", bo.lengthscale_theta_max);
    put("lc0", bo.lengthscale_ctx_min); put("lc1", bo.lengthscale_ctx_max);
    put("prior", residual.prior_precision);
    put("sgw", residual.sg_window); put("sgo", residual.sg_order);
    put("timeout", lap.timeout); put("maxfail", lap.max_solver_failures);
    put("offtrack", lap.offtrack_abort);
    put("lambda", objective.lambda);
    const auto& x = experiments;
    put("cqc", x.collect_q_cont); put("cqa", x.collect_q_adv);
    put("cgm", x.collect_gamma_max);
    put("dqc", x.detuned_q_cont); put("dqa", x.detuned_q_adv);
    put("tqc", x.tuned_q_cont); put("tqa", x.tuned_q_adv);
    put("t1pool", x.table1_pool_laps); put("t1res", x.table1_resamples);
    put("t1sub", x.table1_gp_subsample);
    put("claps", x.cluster_laps); put("tslaps", x.three_settings_laps);
    put("f5s", x.fig5_sobol); put("f5u", x.fig5_ucb);
    put("f7i", x.fig7_iters); put("f7s", x.fig7_seeds);
    os << "tssc=" << x.three_settings_scenario << '\n';
    os << "t1sc=" << x.table1_scenario << '\n';
    return os.str();
}

uint64_t Config::hash() const { return fnv1a64(serialize()); }

uint64_t fnv1a64(const std::string& data) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace racebo
