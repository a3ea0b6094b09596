// etsdm_cli: subcommands composing the etsdm shared library into the
// experiment shapes (schedule reports, Lipschitz scans, error bounds,
// sampling, desk-scale training, perturbation probes and method comparisons).
// All numerics go through the C API in etsdm.h.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "etsdm.h"
#include "kvconfig.hpp"

namespace fs = std::filesystem;
using etsdm::KvConfig;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

void check(etsdm_status st) {
    if (st != ETSDM_OK) fail(etsdm_last_error());
}

std::string hex_hash(uint64_t h) {
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

// RAII over the output directory: files registered here are deleted if the
// run fails partway, so a failed run leaves no partial outputs behind.
class RunOutputs {
  public:
    explicit RunOutputs(const std::string& out_dir) : dir_(out_dir) {
        fs::create_directories(dir_);
    }
    ~RunOutputs() {
        if (!committed_)
            for (const auto& p : files_) {
                std::error_code ec;
                fs::remove(p, ec);
            }
    }
    fs::path path(const std::string& name) {
        fs::path p = dir_ / name;
        files_.push_back(p);
        return p;
    }
    const std::vector<fs::path>& files() const { return files_; }
    void commit() { committed_ = true; }

  private:
    fs::path dir_;
    std::vector<fs::path> files_;
    bool committed_ = false;
};

std::ofstream open_csv(const fs::path& p, const KvConfig& cfg, uint64_t seed,
                       const std::string& header) {
    std::ofstream f(p);
    if (!f) fail("cannot open " + p.string());
    f << "# config_hash=" << hex_hash(cfg.hash()) << " seed=" << seed << "\n";
    f << header << "\n";
    return f;
}

// Minimal polyline plot; CSV stays the authoritative output.
void write_svg(const fs::path& p, const std::string& title, const std::vector<double>& xs,
               const std::vector<std::pair<std::string, std::vector<double>>>& series,
               bool log_y = false) {
    const double W = 640, H = 420, ml = 60, mr = 20, mt = 40, mb = 40;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (double x : xs) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
    }
    for (const auto& [name, ys] : series)
        for (double y : ys) {
            const double v = log_y ? std::log10(std::max(y, 1e-300)) : y;
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    const auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    const auto py = [&](double y) {
        const double v = log_y ? std::log10(std::max(y, 1e-300)) : y;
        return H - mb - (v - ymin) / (ymax - ymin) * (H - mt - mb);
    };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    std::ofstream f(p);
    if (!f) fail("cannot open " + p.string());
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\">\n";
    f << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title
      << "</text>\n";
    f << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
      << H - mb << "\" stroke=\"black\"/>\n";
    f << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
    f << "<text x=\"" << ml - 5 << "\" y=\"" << H - mb << "\" text-anchor=\"end\" font-size=\"10\">"
      << (log_y ? std::pow(10.0, ymin) : ymin) << "</text>\n";
    f << "<text x=\"" << ml - 5 << "\" y=\"" << mt + 10
      << "\" text-anchor=\"end\" font-size=\"10\">" << (log_y ? std::pow(10.0, ymax) : ymax)
      << "</text>\n";
    f << "<text x=\"" << ml << "\" y=\"" << H - mb + 15 << "\" font-size=\"10\">" << xmin
      << "</text>\n";
    f << "<text x=\"" << W - mr << "\" y=\"" << H - mb + 15
      << "\" text-anchor=\"end\" font-size=\"10\">" << xmax << "</text>\n";
    int ci = 0;
    for (const auto& [name, ys] : series) {
        const char* color = colors[ci % 5];
        f << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
        for (size_t i = 0; i < xs.size() && i < ys.size(); ++i)
            f << px(xs[i]) << "," << py(ys[i]) << " ";
        f << "\"/>\n";
        f << "<text x=\"" << W - mr - 5 << "\" y=\"" << mt + 15 + 14 * ci
          << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << color << "\">" << name
          << "</text>\n";
        ++ci;
    }
    f << "</svg>\n";
}

struct ScheduleHandle {
    etsdm_schedule* p = nullptr;
    ~ScheduleHandle() { etsdm_schedule_free(p); }
};
struct MixtureHandle {
    etsdm_mixture* p = nullptr;
    ~MixtureHandle() { etsdm_mixture_free(p); }
};
struct PredictorHandle {
    etsdm_predictor* p = nullptr;
    ~PredictorHandle() { etsdm_predictor_free(p); }
};
struct ModelHandle {
    etsdm_model* p = nullptr;
    ~ModelHandle() { etsdm_model_free(p); }
};

etsdm_schedule_spec schedule_spec_from(const KvConfig& cfg) {
    etsdm_schedule_spec spec;
    etsdm_schedule_spec_default(&spec);
    const std::string kind = cfg.get_string("schedule.kind", "linear");
    check(etsdm_schedule_kind_from_name(kind.c_str(), &spec.kind));
    spec.beta_min_bar = cfg.get_double("schedule.beta_min", spec.beta_min_bar);
    spec.beta_max_bar = cfg.get_double("schedule.beta_max", spec.beta_max_bar);
    spec.cosine_offset = cfg.get_double("schedule.cosine_offset", spec.cosine_offset);
    spec.shift_factor = cfg.get_double("schedule.shift_factor", spec.shift_factor);
    spec.modified_ns = cfg.get_bool("schedule.modified_ns", false) ? 1 : 0;
    spec.T = cfg.get_int("schedule.T", spec.T);
    return spec;
}

void make_schedule(const KvConfig& cfg, ScheduleHandle& out) {
    const auto spec = schedule_spec_from(cfg);
    check(etsdm_schedule_create(&spec, &out.p));
}

void make_mixture(const KvConfig& cfg, MixtureHandle& out) {
    const std::string kind = cfg.get_string("data.kind", "ring");
    if (kind == "normal") {
        check(etsdm_mixture_standard_normal(cfg.get_int("data.dim", 2), &out.p));
    } else if (kind == "ring") {
        check(etsdm_mixture_ring(cfg.get_int("data.ring_k", 8),
                                 cfg.get_double("data.radius", 1.0),
                                 cfg.get_double("data.component_std", 0.05), &out.p));
    } else {
        fail("unknown data.kind: " + kind + " (expected normal|ring)");
    }
}

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        g[static_cast<size_t>(i)] =
            std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / std::max(1, n - 1));
    return g;
}

std::vector<double> lin_grid(double lo, double hi, int n) {
    std::vector<double> g(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        g[static_cast<size_t>(i)] = lo + (hi - lo) * i / std::max(1, n - 1);
    return g;
}

etsdm_train_config train_config_from(const KvConfig& cfg, uint64_t seed) {
    etsdm_train_config tc;
    etsdm_train_config_default(&tc);
    const std::string obj = cfg.get_string("train.objective", "eps");
    if (obj == "eps") tc.objective = ETSDM_OBJECTIVE_EPS;
    else if (obj == "v") tc.objective = ETSDM_OBJECTIVE_V;
    else fail("unknown train.objective: " + obj);
    const std::string cm = cfg.get_string("train.condition_map", "identity");
    if (cm == "identity") tc.condition_map = ETSDM_COND_IDENTITY;
    else if (cm == "shared") tc.condition_map = ETSDM_COND_SHARED;
    else if (cm == "remap") tc.condition_map = ETSDM_COND_REMAP;
    else fail("unknown train.condition_map: " + cm);
    tc.t_tilde = cfg.get_double("partition.t_tilde", 0.1);
    tc.n_sub = cfg.get_int("partition.n", 5);
    const std::string rk = cfg.get_string("train.remap_kind", "inverse_t");
    if (rk == "inverse_t") tc.remap_kind = ETSDM_REMAP_INVERSE_T;
    else if (rk == "inverse_sigmoid") tc.remap_kind = ETSDM_REMAP_INVERSE_SIGMOID;
    else fail("unknown train.remap_kind: " + rk);
    const std::string ts = cfg.get_string("train.time_sampling", "uniform_t");
    if (ts == "uniform_t") tc.time_sampling = ETSDM_TIME_UNIFORM_T;
    else if (ts == "uniform_lambda") tc.time_sampling = ETSDM_TIME_UNIFORM_LAMBDA;
    else fail("unknown train.time_sampling: " + ts);
    tc.lambda_cap = cfg.get_double("train.lambda_cap", 1000.0);
    tc.reg_weight = cfg.get_double("train.reg_weight", 0.0);
    tc.reg_dt = cfg.get_double("train.reg_dt", 1e-3);
    tc.reg_random_offset = cfg.get_bool("train.reg_random_offset", false) ? 1 : 0;
    tc.lr = cfg.get_double("train.lr", 1e-3);
    tc.batch_size = cfg.get_int("train.batch", 256);
    tc.steps = cfg.get_int("train.steps", 20000);
    tc.seed = seed;
    tc.ema_decay = cfg.get_double("train.ema_decay", 0.999);
    tc.hidden_width = cfg.get_int("net.width", 128);
    tc.hidden_depth = cfg.get_int("net.depth", 3);
    tc.embedding_dim = cfg.get_int("net.embedding_dim", 32);
    const std::string act = cfg.get_string("net.activation", "silu");
    if (act == "silu") tc.activation = ETSDM_ACT_SILU;
    else if (act == "relu") tc.activation = ETSDM_ACT_RELU;
    else fail("unknown net.activation: " + act);
    return tc;
}

struct RunContext {
    KvConfig cfg;
    uint64_t seed = 0;
    std::string out_dir = "out";
    std::vector<std::string> assertion_failures;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void expect(bool ok, const std::string& what) {
        if (!ok) assertion_failures.push_back(what);
    }
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void write_manifest(RunOutputs& outs, RunContext& ctx, const std::string& subcommand,
                    const std::string& config_path, json extra = json::object()) {
    json j;
    j["subcommand"] = subcommand;
    j["tool_version"] = etsdm_version();
    j["seed"] = ctx.seed;
    j["config_hash"] = hex_hash(ctx.cfg.hash());
    j["config"] = json::object();
    for (const auto& [k, v] : ctx.cfg.values()) j["config"][k] = v;
    j["inputs"] = json::array();
    if (!config_path.empty()) j["inputs"].push_back(config_path);
    j["outputs"] = json::array();
    for (const auto& p : outs.files()) j["outputs"].push_back(p.string());
    j["wall_seconds"] = ctx.elapsed();
    j["assertion_failures"] = ctx.assertion_failures;
    if (!extra.empty()) j["results"] = extra;
    std::ofstream f(outs.path("manifest.json"));
    if (!f) fail("cannot write manifest");
    f << j.dump(2) << "\n";
}

// ---------------------------------------------------------------- schedule

void cmd_schedule(RunContext& ctx, const std::string& config_path) {
    RunOutputs outs(ctx.out_dir);
    ScheduleHandle sched;
    make_schedule(ctx.cfg, sched);

    const int n = ctx.cfg.get_int("grid.n", 201);
    auto f = open_csv(outs.path("schedule.csv"), ctx.cfg, ctx.seed,
                      "tau,alpha,sigma,dalpha_dtau,dsigma_diverges,dsigma_dtau,snr,drift_coeff,"
                      "diffusion_sq");
    std::vector<double> taus, alphas, sigmas;
    f.precision(17);
    for (int i = 0; i < n; ++i) {
        const double tau = static_cast<double>(i) / (n - 1);
        double a, s, da, snr, drift, g2, dsv;
        int div;
        check(etsdm_schedule_alpha(sched.p, tau, &a));
        check(etsdm_schedule_sigma(sched.p, tau, &s));
        check(etsdm_schedule_dalpha(sched.p, tau, &da));
        check(etsdm_schedule_dsigma(sched.p, tau, &div, &dsv));
        check(etsdm_schedule_snr(sched.p, std::min(tau, 1.0 - 1e-12), &snr));
        check(etsdm_schedule_sde_coeffs(sched.p, tau, &drift, &g2));
        f << tau << "," << a << "," << s << "," << da << "," << div << ","
          << (div ? std::numeric_limits<double>::infinity() : dsv) << "," << snr << "," << drift
          << "," << g2 << "\n";
        taus.push_back(tau);
        alphas.push_back(a);
        sigmas.push_back(s);
    }
    f.close();
    write_svg(outs.path("schedule.svg"), "alpha(tau), sigma(tau)", taus,
              {{"alpha", alphas}, {"sigma", sigmas}});

    double da0;
    int div0, singular;
    double ds0;
    check(etsdm_schedule_dalpha(sched.p, 0.0, &da0));
    check(etsdm_schedule_dsigma(sched.p, 0.0, &div0, &ds0));
    check(etsdm_schedule_singular_at_zero(sched.p, &singular));
    etsdm_schedule_spec resolved;
    check(etsdm_schedule_resolved_spec(sched.p, &resolved));
    json extra;
    extra["dalpha_dtau_at_zero"] = da0;
    extra["dsigma_diverges_at_zero"] = div0 != 0;
    if (!div0) extra["dsigma_dtau_at_zero"] = ds0;
    extra["singular_at_zero"] = singular != 0;
    extra["resolved_beta_min"] = resolved.beta_min_bar;
    extra["resolved_beta_max"] = resolved.beta_max_bar;
    extra["resolved_cosine_offset"] = resolved.cosine_offset;
    ctx.expect(singular == div0, "singularity flag consistent with dsigma divergence");

    write_manifest(outs, ctx, "schedule", config_path, extra);
    outs.commit();
    std::cout << "dalpha/dtau|0 = " << da0 << (singular ? " (singular)" : " (regular)") << "\n";
}

// ---------------------------------------------------------------- lipschitz

void make_predictor(const KvConfig& cfg, const MixtureHandle& gm, const ScheduleHandle& sched,
                    PredictorHandle& out) {
    const std::string kind = cfg.get_string("predictor.kind", "eps");
    if (kind == "eps") {
        check(etsdm_predictor_analytic_eps(gm.p, sched.p, &out.p));
    } else if (kind == "v") {
        check(etsdm_predictor_analytic_v(gm.p, sched.p, &out.p));
    } else if (kind == "shared") {
        etsdm_partition* part = nullptr;
        check(etsdm_partition_create(cfg.get_double("partition.t_tilde", 0.1),
                                     cfg.get_int("partition.n", 5), &part));
        const etsdm_status st = etsdm_predictor_shared_analytic(gm.p, sched.p, part, &out.p);
        etsdm_partition_free(part);
        check(st);
    } else {
        fail("unknown predictor.kind: " + kind + " (expected eps|v|shared)");
    }
}

void cmd_lipschitz(RunContext& ctx, const std::string& config_path) {
    RunOutputs outs(ctx.out_dir);
    ScheduleHandle sched;
    MixtureHandle gm;
    make_schedule(ctx.cfg, sched);
    make_mixture(ctx.cfg, gm);
    PredictorHandle pred;
    make_predictor(ctx.cfg, gm, sched, pred);

    const double t_min = ctx.cfg.get_double("lipschitz.t_min", 1e-5);
    const double t_max = ctx.cfg.get_double("lipschitz.t_max", 0.5);
    const int n_grid = ctx.cfg.get_int("lipschitz.grid_n", 40);
    const double dt = ctx.cfg.get_double("lipschitz.dt", 1e-6);
    const int n_mc = ctx.cfg.get_int("lipschitz.n_mc", 2000);
    const auto grid = log_grid(t_min, t_max, n_grid);
    std::vector<double> values(grid.size()), errs(grid.size());
    check(etsdm_lipschitz_scan(pred.p, gm.p, sched.p, grid.data(), n_grid, dt, n_mc, ctx.seed,
                               values.data(), errs.data()));

    auto f = open_csv(outs.path("lipschitz.csv"), ctx.cfg, ctx.seed, "t,k,std_error");
    f.precision(17);
    for (size_t i = 0; i < grid.size(); ++i)
        f << grid[i] << "," << values[i] << "," << errs[i] << "\n";
    f.close();
    write_svg(outs.path("lipschitz.svg"), "K(t, t+dt)", grid, {{"K", values}}, true);

    json extra;
    extra["max_k"] = *std::max_element(values.begin(), values.end());
    extra["k_at_t_min"] = values.front();
    extra["k_at_t_max"] = values.back();
    write_manifest(outs, ctx, "lipschitz", config_path, extra);
    outs.commit();
    std::cout << "K(t_min)=" << values.front() << " K(t_max)=" << values.back() << "\n";
}

// ---------------------------------------------------------------- bound

void cmd_bound(RunContext& ctx, const std::string& config_path) {
    RunOutputs outs(ctx.out_dir);
    ScheduleHandle sched;
    MixtureHandle gm;
    make_schedule(ctx.cfg, sched);
    make_mixture(ctx.cfg, gm);
    int d;
    check(etsdm_mixture_dim(gm.p, &d));

    const double t_tilde = ctx.cfg.get_double("partition.t_tilde", 0.1);
    if (!(t_tilde > 0.0)) fail("bound: partition.t_tilde must be positive");
    const int n_x = ctx.cfg.get_int("bound.n_x", 8);
    std::vector<double> xs(static_cast<size_t>(n_x * d));
    check(etsdm_mixture_sample(gm.p, n_x, ctx.seed ^ 0x9e3779b9ull, xs.data()));

    // Per-(x, n) dominance records.
    std::vector<int> n_records = {2, 5, 10, 50};
    auto f = open_csv(outs.path("bound.csv"), ctx.cfg, ctx.seed,
                      "x_index,n,k_x,b_x,delta_sigma_max,bound,max_actual_error,holds");
    f.precision(17);
    bool all_hold = true;
    for (int xi = 0; xi < n_x; ++xi) {
        for (int nv : n_records) {
            etsdm_partition* part = nullptr;
            check(etsdm_partition_create(t_tilde, nv, &part));
            etsdm_theorem2_record rec;
            const etsdm_status st = etsdm_theorem2_bound(
                gm.p, sched.p, part, xs.data() + xi * d, d,
                ctx.cfg.get_int("bound.grid_per_subinterval", 512), &rec);
            etsdm_partition_free(part);
            check(st);
            all_hold = all_hold && rec.holds;
            f << xi << "," << nv << "," << rec.k_x << "," << rec.b_x << ","
              << rec.delta_sigma_max << "," << rec.bound << "," << rec.max_actual_error << ","
              << rec.holds << "\n";
        }
    }
    f.close();
    ctx.expect(all_hold, "error bound dominates the actual error at every tested (x, n)");

    // Half-order convergence sweep.
    std::vector<int> n_sweep;
    for (int nv = ctx.cfg.get_int("bound.sweep_min", 2); nv <= ctx.cfg.get_int("bound.sweep_max", 512);
         nv *= 2)
        n_sweep.push_back(nv);
    double slope, limit_ratio;
    std::vector<double> dts(n_sweep.size()), errs(n_sweep.size());
    check(etsdm_convergence_order(gm.p, sched.p, t_tilde, n_sweep.data(),
                                  static_cast<int>(n_sweep.size()), xs.data(), n_x,
                                  ctx.cfg.get_int("bound.probes_per_subinterval", 5), &slope,
                                  &limit_ratio, dts.data(), errs.data()));
    auto g = open_csv(outs.path("convergence.csv"), ctx.cfg, ctx.seed, "n,delta_t,max_error");
    g.precision(17);
    for (size_t i = 0; i < n_sweep.size(); ++i)
        g << n_sweep[i] << "," << dts[i] << "," << errs[i] << "\n";
    g.close();
    write_svg(outs.path("convergence.svg"), "max error vs delta_t (log-log)", dts,
              {{"max_error", errs}}, true);
    ctx.expect(slope >= 0.45, "convergence slope >= 0.45 (half-order rate)");

    json extra;
    extra["slope"] = slope;
    extra["limit_ratio"] = limit_ratio;
    extra["all_bounds_hold"] = all_hold;
    write_manifest(outs, ctx, "bound", config_path, extra);
    outs.commit();
    std::cout << "slope=" << slope << " limit_ratio=" << limit_ratio
              << " bounds_hold=" << all_hold << "\n";
}

// ---------------------------------------------------------------- sample

etsdm_sampler_config sampler_config_from(const KvConfig& cfg, uint64_t seed) {
    etsdm_sampler_config sc{};
    const std::string kind = cfg.get_string("sampler.kind", "ancestral");
    check(etsdm_sampler_kind_from_name(kind.c_str(), &sc.kind));
    sc.nfe = cfg.get_int("sampler.nfe", 1000);
    sc.seed = seed;
    sc.eta = cfg.get_double("sampler.eta", 0.0);
    const std::string grid = cfg.get_string("sampler.time_grid", "uniform_t");
    if (grid == "uniform_t") sc.time_grid = ETSDM_GRID_UNIFORM_T;
    else if (grid == "log_snr") sc.time_grid = ETSDM_GRID_LOG_SNR;
    else if (grid == "sigma_angle") sc.time_grid = ETSDM_GRID_SIGMA_ANGLE;
    else fail("unknown sampler.time_grid: " + grid + " (expected uniform_t|log_snr|sigma_angle)");
    sc.has_partition = cfg.get_bool("partition.enabled", false) ? 1 : 0;
    sc.t_tilde = cfg.get_double("partition.t_tilde", 0.1);
    sc.n_sub = cfg.get_int("partition.n", 5);
    return sc;
}

double swd_to_exact(const MixtureHandle& gm, int d, const std::vector<double>& samples, int n,
                    uint64_t seed, const KvConfig& cfg) {
    std::vector<double> exact(static_cast<size_t>(n) * d);
    check(etsdm_mixture_sample(gm.p, n, seed ^ 0xabcdefull, exact.data()));
    double value;
    check(etsdm_sliced_wasserstein(samples.data(), n, exact.data(), n, d,
                                   cfg.get_int("metrics.n_projections", 128), seed ^ 0x5157ull,
                                   &value, nullptr));
    return value;
}

void cmd_sample(RunContext& ctx, const std::string& config_path) {
    RunOutputs outs(ctx.out_dir);
    ScheduleHandle sched;
    MixtureHandle gm;
    make_schedule(ctx.cfg, sched);
    make_mixture(ctx.cfg, gm);
    PredictorHandle pred;
    make_predictor(ctx.cfg, gm, sched, pred);
    int d;
    check(etsdm_mixture_dim(gm.p, &d));

    const int n = ctx.cfg.get_int("sampler.n_samples", 10000);
    const auto sc = sampler_config_from(ctx.cfg, ctx.seed);
    std::vector<double> samples(static_cast<size_t>(n) * d);
    int warnings = 0;
    check(etsdm_sample(pred.p, sched.p, &sc, n, samples.data(), &warnings));

    std::string header = "x0";
    for (int j = 1; j < d; ++j) header += ",x" + std::to_string(j);
    auto f = open_csv(outs.path("samples.csv"), ctx.cfg, ctx.seed, header);
    f.precision(17);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) f << (j ? "," : "") << samples[i * d + j];
        f << "\n";
    }
    f.close();

    const double swd = swd_to_exact(gm, d, samples, n, ctx.seed, ctx.cfg);
    json extra;
    extra["swd_to_exact"] = swd;
    extra["sampler_warnings"] = warnings;
    write_manifest(outs, ctx, "sample", config_path, extra);
    outs.commit();
    std::cout << "swd_to_exact=" << swd << "\n";
}

// ---------------------------------------------------------------- train

void evaluate_model(RunContext& ctx, RunOutputs& outs, const ScheduleHandle& sched,
                    const MixtureHandle& gm, const ModelHandle& model, json& extra) {
    PredictorHandle pred;
    check(etsdm_model_predictor(model.p, &pred.p));
    int d;
    check(etsdm_mixture_dim(gm.p, &d));

    const int n_eval = ctx.cfg.get_int("eval.n_samples", 2000);
    auto sc = sampler_config_from(ctx.cfg, ctx.seed ^ 0xe7a1ull);
    std::vector<double> samples(static_cast<size_t>(n_eval) * d);
    check(etsdm_sample(pred.p, sched.p, &sc, n_eval, samples.data(), nullptr));
    extra["swd_to_exact"] = swd_to_exact(gm, d, samples, n_eval, ctx.seed, ctx.cfg);

    const auto grid = log_grid(ctx.cfg.get_double("lipschitz.t_min", 1e-3),
                               ctx.cfg.get_double("lipschitz.t_max", 0.5),
                               ctx.cfg.get_int("lipschitz.grid_n", 20));
    std::vector<double> values(grid.size());
    check(etsdm_lipschitz_scan(pred.p, gm.p, sched.p, grid.data(),
                               static_cast<int>(grid.size()),
                               ctx.cfg.get_double("lipschitz.dt", 1e-4),
                               ctx.cfg.get_int("lipschitz.n_mc", 500), ctx.seed, values.data(),
                               nullptr));
    auto f = open_csv(outs.path("lipschitz.csv"), ctx.cfg, ctx.seed, "t,k");
    f.precision(17);
    for (size_t i = 0; i < grid.size(); ++i) f << grid[i] << "," << values[i] << "\n";
    f.close();
    extra["max_k"] = *std::max_element(values.begin(), values.end());
}

void cmd_train(RunContext& ctx, const std::string& config_path) {
    RunOutputs outs(ctx.out_dir);
    ScheduleHandle sched;
    MixtureHandle gm;
    make_schedule(ctx.cfg, sched);
    make_mixture(ctx.cfg, gm);

    const auto tc = train_config_from(ctx.cfg, ctx.seed);
    std::vector<double> losses(static_cast<size_t>(tc.steps));
    ModelHandle model;
    const std::string resume = ctx.cfg.get_string("train.resume", "");
    if (resume.empty())
        check(etsdm_train(gm.p, sched.p, &tc, &model.p, losses.data()));
    else
        check(etsdm_train_resume(gm.p, sched.p, &tc, resume.c_str(), &model.p, losses.data()));

    auto f = open_csv(outs.path("loss.csv"), ctx.cfg, ctx.seed, "step,loss");
    f.precision(17);
    std::vector<double> steps_axis(losses.size());
    for (size_t i = 0; i < losses.size(); ++i) {
        steps_axis[i] = static_cast<double>(i);
        f << i << "," << losses[i] << "\n";
    }
    f.close();
    write_svg(outs.path("loss.svg"), "training loss", steps_axis, {{"loss", losses}}, true);
    check(etsdm_model_save(model.p, outs.path("model.ckpt").string().c_str()));

    // Moving-average non-increase sanity over the run.
    const int win = 500;
    if (static_cast<int>(losses.size()) >= 2 * win) {
        double first = 0, last = 0;
        for (int i = 0; i < win; ++i) {
            first += losses[static_cast<size_t>(i)];
            last += losses[losses.size() - win + i];
        }
        ctx.expect(last <= first, "500-step moving-average loss decreased over the run");
    }

    json extra;
    extra["final_loss"] = losses.empty() ? 0.0 : losses.back();
    evaluate_model(ctx, outs, sched, gm, model, extra);
    write_manifest(outs, ctx, "train", config_path, extra);
    outs.commit();
    std::cout << "final_loss=" << extra["final_loss"] << " swd=" << extra["swd_to_exact"] << "\n";
}

// ---------------------------------------------------------------- perturb

void cmd_perturb(RunContext& ctx, const std::string& config_path) {
    RunOutputs outs(ctx.out_dir);
    ScheduleHandle sched;
    MixtureHandle gm;
    make_schedule(ctx.cfg, sched);
    make_mixture(ctx.cfg, gm);

    PredictorHandle base;
    check(etsdm_predictor_analytic_eps(gm.p, sched.p, &base.p));
    etsdm_partition* part = nullptr;
    check(etsdm_partition_create(ctx.cfg.get_double("partition.t_tilde", 0.1),
                                 ctx.cfg.get_int("partition.n", 5), &part));
    PredictorHandle shared;
    const etsdm_status st = etsdm_predictor_shared_analytic(gm.p, sched.p, part, &shared.p);
    etsdm_partition_free(part);
    check(st);

    const double t_probe = ctx.cfg.get_double("perturb.t", 0.01);
    const auto scales = lin_grid(0.0, ctx.cfg.get_double("perturb.max_scale", 0.5),
                                 ctx.cfg.get_int("perturb.n_scales", 11));
    const int n = ctx.cfg.get_int("perturb.n_mc", 300);
    std::vector<double> vb(scales.size()), vs(scales.size());
    check(etsdm_perturbation_probe(base.p, sched.p, t_probe, scales.data(),
                                   static_cast<int>(scales.size()), gm.p, n, ctx.seed,
                                   vb.data()));
    check(etsdm_perturbation_probe(shared.p, sched.p, t_probe, scales.data(),
                                   static_cast<int>(scales.size()), gm.p, n, ctx.seed,
                                   vs.data()));

    auto f = open_csv(outs.path("perturb.csv"), ctx.cfg, ctx.seed, "scale,baseline,shared");
    f.precision(17);
    for (size_t i = 0; i < scales.size(); ++i)
        f << scales[i] << "," << vb[i] << "," << vs[i] << "\n";
    f.close();
    write_svg(outs.path("perturb.svg"), "one-step x0 error vs input perturbation", scales,
              {{"baseline", vb}, {"shared", vs}});

    json extra;
    extra["baseline_at_max_scale"] = vb.back();
    extra["shared_at_max_scale"] = vs.back();
    write_manifest(outs, ctx, "perturb", config_path, extra);
    outs.commit();
    std::cout << "baseline=" << vb.back() << " shared=" << vs.back() << " at scale "
              << scales.back() << "\n";
}

// ---------------------------------------------------------------- compare

double cell_run(RunContext& ctx, const ScheduleHandle& sched, const MixtureHandle& gm,
                etsdm_train_config tc, double* out_max_k) {
    ModelHandle model;
    check(etsdm_train(gm.p, sched.p, &tc, &model.p, nullptr));
    PredictorHandle pred;
    check(etsdm_model_predictor(model.p, &pred.p));
    int d;
    check(etsdm_mixture_dim(gm.p, &d));

    const int n_eval = ctx.cfg.get_int("eval.n_samples", 2000);
    auto sc = sampler_config_from(ctx.cfg, ctx.seed ^ 0xc0ffeeull);
    std::vector<double> samples(static_cast<size_t>(n_eval) * d);
    check(etsdm_sample(pred.p, sched.p, &sc, n_eval, samples.data(), nullptr));
    const double swd = swd_to_exact(gm, d, samples, n_eval, ctx.seed, ctx.cfg);

    if (out_max_k) {
        const auto grid = log_grid(2e-3, 0.5, 10);
        std::vector<double> values(grid.size());
        check(etsdm_lipschitz_scan(pred.p, gm.p, sched.p, grid.data(),
                                   static_cast<int>(grid.size()), 1e-4, 200, ctx.seed,
                                   values.data(), nullptr));
        *out_max_k = *std::max_element(values.begin(), values.end());
    }
    return swd;
}

void cmd_compare(RunContext& ctx, const std::string& config_path) {
    RunOutputs outs(ctx.out_dir);
    ScheduleHandle sched;
    MixtureHandle gm;
    make_schedule(ctx.cfg, sched);
    make_mixture(ctx.cfg, gm);

    auto base_tc = train_config_from(ctx.cfg, ctx.seed);
    base_tc.steps = ctx.cfg.get_int("compare.steps", 1000);
    base_tc.batch_size = ctx.cfg.get_int("compare.batch", 128);
    const std::string mode = ctx.cfg.get_string("compare.mode", "methods");
    json extra;

    if (mode == "methods" || mode == "both") {
        auto f = open_csv(outs.path("methods.csv"), ctx.cfg, ctx.seed, "method,swd,max_k");
        f.precision(12);
        const std::vector<std::string> methods = {"baseline", "etsdm", "ddpm_r", "modified_ns",
                                                  "remap"};
        for (const auto& method : methods) {
            etsdm_train_config tc = base_tc;
            ScheduleHandle local_sched;
            const etsdm_schedule* use_sched = sched.p;
            if (method == "etsdm") {
                tc.condition_map = ETSDM_COND_SHARED;
            } else if (method == "ddpm_r") {
                tc.reg_weight = ctx.cfg.get_double("train.reg_weight", 0.01);
            } else if (method == "modified_ns") {
                auto spec = schedule_spec_from(ctx.cfg);
                spec.modified_ns = 1;
                check(etsdm_schedule_create(&spec, &local_sched.p));
                use_sched = local_sched.p;
            } else if (method == "remap") {
                tc.condition_map = ETSDM_COND_REMAP;
            }
            double max_k = 0.0;
            ModelHandle model;
            check(etsdm_train(gm.p, use_sched, &tc, &model.p, nullptr));
            PredictorHandle pred;
            check(etsdm_model_predictor(model.p, &pred.p));
            int d;
            check(etsdm_mixture_dim(gm.p, &d));
            const int n_eval = ctx.cfg.get_int("eval.n_samples", 2000);
            auto sc = sampler_config_from(ctx.cfg, ctx.seed ^ 0xc0ffeeull);
            std::vector<double> samples(static_cast<size_t>(n_eval) * d);
            check(etsdm_sample(pred.p, use_sched, &sc, n_eval, samples.data(), nullptr));
            const double swd = swd_to_exact(gm, d, samples, n_eval, ctx.seed, ctx.cfg);
            const auto grid = log_grid(2e-3, 0.5, 10);
            std::vector<double> values(grid.size());
            check(etsdm_lipschitz_scan(pred.p, gm.p, use_sched, grid.data(),
                                       static_cast<int>(grid.size()), 1e-4, 200, ctx.seed,
                                       values.data(), nullptr));
            max_k = *std::max_element(values.begin(), values.end());
            f << method << "," << swd << "," << max_k << "\n";
            extra["methods"][method] = {{"swd", swd}, {"max_k", max_k}};
        }
        f.close();
    }

    if (mode == "ablation" || mode == "both") {
        auto f = open_csv(outs.path("ablation.csv"), ctx.cfg, ctx.seed, "n,t_tilde,swd");
        f.precision(12);
        const std::vector<int> ns = {2, 5, 10, 20, 50, 100};
        std::vector<double> t_tildes = {0.05, 0.1, 0.2};
        for (int nv : ns) {
            for (double tt : t_tildes) {
                etsdm_train_config tc = base_tc;
                tc.condition_map = ETSDM_COND_SHARED;
                tc.n_sub = nv;
                tc.t_tilde = tt;
                const double swd = cell_run(ctx, sched, gm, tc, nullptr);
                f << nv << "," << tt << "," << swd << "\n";
            }
        }
        f.close();
    }
    if (mode != "methods" && mode != "ablation" && mode != "both")
        fail("unknown compare.mode: " + mode);

    write_manifest(outs, ctx, "compare", config_path, extra);
    outs.commit();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"etsdm experiments: schedules, Lipschitz scans, bounds, samplers, training"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    uint64_t seed = 0;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--seed", seed, "master RNG seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--set", overrides, "override config keys, e.g. --set schedule.kind=cosine");

    const char* names[] = {"schedule", "lipschitz", "bound", "sample", "train", "perturb",
                           "compare"};
    const char* descs[] = {"schedule curves and derivative-at-zero report",
                           "Lipschitz-constant scan K(t, t+dt)",
                           "shared-condition error bound and convergence order",
                           "reverse-process sampling with optional condition sharing",
                           "desk-scale training run plus auto-evaluation",
                           "perturbation-error curves for baseline vs shared predictors",
                           "method-comparison and (n, t_tilde) ablation grids"};
    for (int i = 0; i < 7; ++i) app.add_subcommand(names[i], descs[i])->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        RunContext ctx;
        if (!config_path.empty()) ctx.cfg = KvConfig::load(config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) fail("--set expects key=value, got: " + kv);
            ctx.cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        // Flags override file keys.
        if (app.count("--seed")) ctx.cfg.set("seed", std::to_string(seed));
        ctx.seed = ctx.cfg.get_u64("seed", 0);
        ctx.out_dir = out_dir;

        const std::string sub = app.get_subcommands().front()->get_name();
        if (sub == "schedule") cmd_schedule(ctx, config_path);
        else if (sub == "lipschitz") cmd_lipschitz(ctx, config_path);
        else if (sub == "bound") cmd_bound(ctx, config_path);
        else if (sub == "sample") cmd_sample(ctx, config_path);
        else if (sub == "train") cmd_train(ctx, config_path);
        else if (sub == "perturb") cmd_perturb(ctx, config_path);
        else if (sub == "compare") cmd_compare(ctx, config_path);

        if (!ctx.assertion_failures.empty()) {
            for (const auto& msg : ctx.assertion_failures)
                std::cerr << "assertion failed: " << msg << "\n";
            return 1;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
