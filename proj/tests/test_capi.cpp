#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "etsdm.h"

namespace {

struct TempPath {
    std::string path;
    explicit TempPath(const std::string& name) : path("capi_test_" + name) {}
    ~TempPath() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("null arguments are rejected with an explanatory message") {
    CHECK(etsdm_schedule_create(nullptr, nullptr) == ETSDM_ERR_INVALID_ARGUMENT);
    CHECK(std::strlen(etsdm_last_error()) > 0);
    CHECK(etsdm_schedule_alpha(nullptr, 0.5, nullptr) == ETSDM_ERR_INVALID_ARGUMENT);
    CHECK(etsdm_mixture_standard_normal(2, nullptr) == ETSDM_ERR_INVALID_ARGUMENT);
    CHECK(etsdm_partition_create(0.1, 5, nullptr) == ETSDM_ERR_INVALID_ARGUMENT);
    CHECK(etsdm_sample(nullptr, nullptr, nullptr, 4, nullptr, nullptr) ==
          ETSDM_ERR_INVALID_ARGUMENT);
    // NULL-safe frees must not crash.
    etsdm_schedule_free(nullptr);
    etsdm_mixture_free(nullptr);
    etsdm_partition_free(nullptr);
    etsdm_predictor_free(nullptr);
    etsdm_model_free(nullptr);
    CHECK(std::strlen(etsdm_version()) > 0);
}

TEST_CASE("schedule handle reproduces the core values and maps domain errors") {
    etsdm_schedule_spec spec;
    etsdm_schedule_spec_default(&spec);
    CHECK(spec.kind == ETSDM_SCHEDULE_LINEAR);
    CHECK(spec.beta_min_bar == 0.1);
    CHECK(spec.beta_max_bar == 20.0);
    CHECK(spec.T == 1000);

    etsdm_schedule* s = nullptr;
    REQUIRE(etsdm_schedule_create(&spec, &s) == ETSDM_OK);
    double a = 0.0, sg = 0.0, da = 0.0, snr = 0.0;
    CHECK(etsdm_schedule_alpha(s, 0.0, &a) == ETSDM_OK);
    CHECK(a == 1.0);
    CHECK(etsdm_schedule_alpha(s, 0.5, &a) == ETSDM_OK);
    CHECK(etsdm_schedule_sigma(s, 0.5, &sg) == ETSDM_OK);
    CHECK(a * a + sg * sg == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(etsdm_schedule_dalpha(s, 0.0, &da) == ETSDM_OK);
    CHECK(da == doctest::Approx(-0.05).epsilon(1e-12));
    CHECK(etsdm_schedule_snr(s, 0.5, &snr) == ETSDM_OK);
    CHECK(snr == doctest::Approx(a * a / (sg * sg)).epsilon(1e-12));

    int diverges = 0;
    double v = 0.0;
    CHECK(etsdm_schedule_dsigma(s, 0.0, &diverges, &v) == ETSDM_OK);
    CHECK(diverges == 1);
    CHECK(etsdm_schedule_dsigma(s, 0.5, &diverges, &v) == ETSDM_OK);
    CHECK(diverges == 0);
    int singular = 0;
    CHECK(etsdm_schedule_singular_at_zero(s, &singular) == ETSDM_OK);
    CHECK(singular == 1);

    double drift = 0.0, diff_sq = 0.0;
    CHECK(etsdm_schedule_sde_coeffs(s, 0.3, &drift, &diff_sq) == ETSDM_OK);
    CHECK(diff_sq == doctest::Approx(0.1 + (20.0 - 0.1) * 0.3).epsilon(1e-10));

    CHECK(etsdm_schedule_alpha(s, 1.5, &a) == ETSDM_ERR_DOMAIN);
    CHECK(std::string(etsdm_last_error()).find("tau") != std::string::npos);

    int kind = -1;
    CHECK(etsdm_schedule_kind_from_name("cosine", &kind) == ETSDM_OK);
    CHECK(kind == ETSDM_SCHEDULE_COSINE);
    CHECK(etsdm_schedule_kind_from_name("nope", &kind) == ETSDM_ERR_INVALID_ARGUMENT);
    etsdm_schedule_free(s);

    // Invalid spec surfaces as invalid-argument.
    spec.beta_min_bar = -1.0;
    etsdm_schedule* bad = nullptr;
    CHECK(etsdm_schedule_create(&spec, &bad) == ETSDM_ERR_INVALID_ARGUMENT);
    CHECK(bad == nullptr);
}

TEST_CASE("modified-ns resolution is visible through the resolved spec") {
    etsdm_schedule_spec spec;
    etsdm_schedule_spec_default(&spec);
    spec.modified_ns = 1;
    etsdm_schedule* s = nullptr;
    REQUIRE(etsdm_schedule_create(&spec, &s) == ETSDM_OK);
    etsdm_schedule_spec resolved;
    CHECK(etsdm_schedule_resolved_spec(s, &resolved) == ETSDM_OK);
    CHECK(resolved.beta_min_bar == 0.0);
    double da = 1.0;
    CHECK(etsdm_schedule_dalpha(s, 0.0, &da) == ETSDM_OK);
    CHECK(std::abs(da) < 1e-12);
    etsdm_schedule_free(s);
}

TEST_CASE("mixture handle: sampling determinism, density, score, marginal") {
    etsdm_mixture* m = nullptr;
    REQUIRE(etsdm_mixture_ring(8, 1.0, 0.05, &m) == ETSDM_OK);
    int dim = 0;
    CHECK(etsdm_mixture_dim(m, &dim) == ETSDM_OK);
    CHECK(dim == 2);

    std::vector<double> s1(2 * 100), s2(2 * 100);
    CHECK(etsdm_mixture_sample(m, 100, 9, s1.data()) == ETSDM_OK);
    CHECK(etsdm_mixture_sample(m, 100, 9, s2.data()) == ETSDM_OK);
    CHECK(s1 == s2);
    CHECK(etsdm_mixture_sample(m, 100, 10, s2.data()) == ETSDM_OK);
    CHECK(s1 != s2);

    const double x[2] = {0.3, -0.1};
    double ld = 0.0;
    double score[2] = {0.0, 0.0};
    CHECK(etsdm_mixture_log_density(m, x, 2, &ld) == ETSDM_OK);
    CHECK(std::isfinite(ld));
    CHECK(etsdm_mixture_score(m, x, 2, score) == ETSDM_OK);
    CHECK(etsdm_mixture_score(m, x, 3, score) == ETSDM_ERR_INVALID_ARGUMENT);

    etsdm_schedule_spec spec;
    etsdm_schedule_spec_default(&spec);
    etsdm_schedule* s = nullptr;
    REQUIRE(etsdm_schedule_create(&spec, &s) == ETSDM_OK);
    std::vector<double> noised(2 * 50);
    CHECK(etsdm_mixture_sample_marginal(m, s, 0.5, 50, 3, noised.data()) == ETSDM_OK);
    CHECK(etsdm_mixture_sample_marginal(m, s, 1.5, 50, 3, noised.data()) == ETSDM_ERR_DOMAIN);
    etsdm_schedule_free(s);
    etsdm_mixture_free(m);
}

TEST_CASE("partition and theorem-2 bound round-trip through the C layer") {
    etsdm_partition* p = nullptr;
    REQUIRE(etsdm_partition_create(0.1, 5, &p) == ETSDM_OK);
    double mapped = -1.0;
    CHECK(etsdm_partition_map(p, 0.055, &mapped) == ETSDM_OK);
    CHECK(mapped == doctest::Approx(0.04).epsilon(1e-15));
    double bounds[6];
    CHECK(etsdm_partition_boundaries(p, bounds) == ETSDM_OK);
    CHECK(bounds[0] == 0.0);
    CHECK(bounds[5] == doctest::Approx(0.1).epsilon(1e-15));

    etsdm_partition* bad = nullptr;
    CHECK(etsdm_partition_create(0.0, 5, &bad) == ETSDM_ERR_INVALID_ARGUMENT);

    etsdm_mixture* m = nullptr;
    etsdm_schedule* s = nullptr;
    etsdm_schedule_spec spec;
    etsdm_schedule_spec_default(&spec);
    REQUIRE(etsdm_mixture_standard_normal(2, &m) == ETSDM_OK);
    REQUIRE(etsdm_schedule_create(&spec, &s) == ETSDM_OK);
    const double x[2] = {0.5, -0.25};
    etsdm_theorem2_record rec;
    CHECK(etsdm_theorem2_bound(m, s, p, x, 2, 256, &rec) == ETSDM_OK);
    CHECK(rec.holds == 1);
    CHECK(rec.max_actual_error <= rec.bound * (1.0 + 1e-9) + 1e-15);
    CHECK(rec.delta_sigma_max > 0.0);

    const int ns[] = {2, 4, 8, 16, 32, 64, 128, 256, 512};
    double slope = 0.0, limit_ratio = 0.0;
    std::vector<double> dts(9), errs(9);
    CHECK(etsdm_convergence_order(m, s, 0.1, ns, 9, x, 1, 64, &slope, &limit_ratio, dts.data(),
                                  errs.data()) == ETSDM_OK);
    CHECK(slope >= 0.45);
    CHECK(limit_ratio == doctest::Approx(std::sqrt(0.1)).epsilon(0.02));
    CHECK(dts[0] > dts[8]);
    CHECK(errs[0] > errs[8]);

    etsdm_partition_free(p);
    etsdm_mixture_free(m);
    etsdm_schedule_free(s);
}

TEST_CASE("predictor handles: analytic eval, lipschitz scan, sampling determinism") {
    etsdm_mixture* m = nullptr;
    etsdm_schedule* s = nullptr;
    etsdm_partition* p = nullptr;
    etsdm_schedule_spec spec;
    etsdm_schedule_spec_default(&spec);
    REQUIRE(etsdm_mixture_standard_normal(2, &m) == ETSDM_OK);
    REQUIRE(etsdm_schedule_create(&spec, &s) == ETSDM_OK);
    REQUIRE(etsdm_partition_create(0.1, 5, &p) == ETSDM_OK);

    etsdm_predictor* eps = nullptr;
    etsdm_predictor* shared = nullptr;
    REQUIRE(etsdm_predictor_analytic_eps(m, s, &eps) == ETSDM_OK);
    REQUIRE(etsdm_predictor_shared_analytic(m, s, p, &shared) == ETSDM_OK);
    int dim = 0;
    CHECK(etsdm_predictor_dim(eps, &dim) == ETSDM_OK);
    CHECK(dim == 2);

    // For N(0, I) the optimal eps is sigma(t) * x.
    const double x[2] = {0.7, -0.2};
    double out[2];
    double sg = 0.0;
    CHECK(etsdm_schedule_sigma(s, 0.4, &sg) == ETSDM_OK);
    CHECK(etsdm_predictor_eval(eps, x, 2, 0.4, out) == ETSDM_OK);
    CHECK(std::abs(out[0] - sg * x[0]) < 1e-12);
    CHECK(std::abs(out[1] - sg * x[1]) < 1e-12);
    CHECK(etsdm_predictor_eval(eps, x, 2, 1.7, out) == ETSDM_ERR_DOMAIN);

    const double grid[3] = {0.01, 0.05, 0.5};
    double values[3], stderrs[3];
    CHECK(etsdm_lipschitz_scan(eps, m, s, grid, 3, 1e-4, 200, 5, values, stderrs) == ETSDM_OK);
    CHECK(values[0] > values[2]);  // singular schedule: K grows toward zero
    double shared_values[2];
    const double inner_grid[2] = {0.005, 0.045};
    CHECK(etsdm_lipschitz_scan(shared, m, s, inner_grid, 2, 1e-4, 200, 5, shared_values,
                               nullptr) == ETSDM_OK);
    CHECK(shared_values[0] == 0.0);
    CHECK(shared_values[1] == 0.0);

    const double scales[3] = {0.0, 0.1, 0.2};
    double probe[3];
    CHECK(etsdm_perturbation_probe(eps, s, 0.01, scales, 3, m, 50, 7, probe) == ETSDM_OK);
    CHECK(probe[0] == 0.0);
    CHECK(probe[2] >= probe[1]);

    etsdm_sampler_config cfg;
    std::memset(&cfg, 0, sizeof cfg);
    cfg.kind = ETSDM_SAMPLER_DDIM;
    cfg.nfe = 25;
    cfg.seed = 11;
    std::vector<double> out1(64 * 2), out2(64 * 2);
    int warn = -1;
    CHECK(etsdm_sample(eps, s, &cfg, 64, out1.data(), &warn) == ETSDM_OK);
    CHECK(warn == 0);
    CHECK(etsdm_sample(eps, s, &cfg, 64, out2.data(), nullptr) == ETSDM_OK);
    CHECK(out1 == out2);

    cfg.has_partition = 1;
    cfg.t_tilde = 0.1;
    cfg.n_sub = 5;
    CHECK(etsdm_sample(shared, s, &cfg, 64, out1.data(), nullptr) == ETSDM_OK);

    int kind = -1;
    CHECK(etsdm_sampler_kind_from_name("dpm_solver_2", &kind) == ETSDM_OK);
    CHECK(kind == ETSDM_SAMPLER_DPM_SOLVER_2);
    CHECK(etsdm_sampler_kind_from_name("bogus", &kind) == ETSDM_ERR_INVALID_ARGUMENT);

    etsdm_predictor_free(eps);
    etsdm_predictor_free(shared);
    etsdm_partition_free(p);
    etsdm_mixture_free(m);
    etsdm_schedule_free(s);
}

TEST_CASE("training through the C layer: loss curve, predictor view, save/resume") {
    etsdm_mixture* m = nullptr;
    etsdm_schedule* s = nullptr;
    etsdm_schedule_spec spec;
    etsdm_schedule_spec_default(&spec);
    REQUIRE(etsdm_mixture_standard_normal(2, &m) == ETSDM_OK);
    REQUIRE(etsdm_schedule_create(&spec, &s) == ETSDM_OK);

    etsdm_train_config cfg;
    etsdm_train_config_default(&cfg);
    CHECK(cfg.batch_size == 256);
    CHECK(cfg.ema_decay == 0.999);
    cfg.steps = 40;
    cfg.batch_size = 32;
    cfg.hidden_width = 16;
    cfg.hidden_depth = 2;
    cfg.embedding_dim = 8;
    cfg.seed = 21;

    etsdm_model* model = nullptr;
    std::vector<double> curve(static_cast<size_t>(cfg.steps));
    REQUIRE(etsdm_train(m, s, &cfg, &model, curve.data()) == ETSDM_OK);
    for (double v : curve) CHECK(std::isfinite(v));

    etsdm_predictor* pred = nullptr;
    REQUIRE(etsdm_model_predictor(model, &pred) == ETSDM_OK);
    const double x[2] = {0.4, 0.4};
    double y1[2], y2[2];
    CHECK(etsdm_predictor_eval(pred, x, 2, 0.3, y1) == ETSDM_OK);

    TempPath ckpt("model.ckpt");
    REQUIRE(etsdm_model_save(model, ckpt.path.c_str()) == ETSDM_OK);
    etsdm_model_free(model);
    // The predictor view must outlive the freed model handle.
    CHECK(etsdm_predictor_eval(pred, x, 2, 0.3, y2) == ETSDM_OK);
    CHECK(y1[0] == y2[0]);
    CHECK(y1[1] == y2[1]);

    // Resume for 40 more steps == one 80-step run, bit for bit.
    etsdm_train_config cfg80 = cfg;
    cfg80.steps = 80;
    etsdm_model* direct = nullptr;
    REQUIRE(etsdm_train(m, s, &cfg80, &direct, nullptr) == ETSDM_OK);
    etsdm_model* resumed = nullptr;
    REQUIRE(etsdm_train_resume(m, s, &cfg80, ckpt.path.c_str(), &resumed, nullptr) == ETSDM_OK);

    etsdm_predictor* pd = nullptr;
    etsdm_predictor* pr = nullptr;
    REQUIRE(etsdm_model_predictor(direct, &pd) == ETSDM_OK);
    REQUIRE(etsdm_model_predictor(resumed, &pr) == ETSDM_OK);
    for (double t : {0.01, 0.2, 0.9}) {
        CHECK(etsdm_predictor_eval(pd, x, 2, t, y1) == ETSDM_OK);
        CHECK(etsdm_predictor_eval(pr, x, 2, t, y2) == ETSDM_OK);
        CHECK(y1[0] == y2[0]);
        CHECK(y1[1] == y2[1]);
    }

    CHECK(etsdm_train_resume(m, s, &cfg80, "no_such_file.ckpt", &resumed, nullptr) ==
          ETSDM_ERR_IO);

    etsdm_predictor_free(pred);
    etsdm_predictor_free(pd);
    etsdm_predictor_free(pr);
    etsdm_model_free(direct);
    etsdm_model_free(resumed);
    etsdm_mixture_free(m);
    etsdm_schedule_free(s);
}

TEST_CASE("training-time sampling is exposed for auditing") {
    etsdm_train_config cfg;
    etsdm_train_config_default(&cfg);
    std::vector<double> ts(1000);
    CHECK(etsdm_sample_training_times(&cfg, 1000, 3, 1000, ts.data()) == ETSDM_OK);
    for (double t : ts) {
        CHECK(t > 0.0);
        CHECK(t <= 1.0);
    }
    cfg.time_sampling = ETSDM_TIME_UNIFORM_LAMBDA;  // requires a remap condition map
    CHECK(etsdm_sample_training_times(&cfg, 10, 3, 1000, ts.data()) ==
          ETSDM_ERR_INVALID_ARGUMENT);
}

TEST_CASE("metric entry points mirror the core implementations") {
    const double a[4] = {0.0, 1.0, 2.0, 3.0};
    const double b[4] = {0.5, 1.5, 2.5, 3.5};
    double v = -1.0;
    CHECK(etsdm_wasserstein_1d(a, 4, b, 4, &v) == ETSDM_OK);
    CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(etsdm_wasserstein_1d(a, 0, b, 4, &v) == ETSDM_ERR_INVALID_ARGUMENT);

    CHECK(etsdm_ks_statistic(a, 4, a, 4, &v) == ETSDM_OK);
    CHECK(v == 0.0);

    // 2-D points; sliced distance of a set to itself is zero.
    const double pts[8] = {0.0, 0.0, 1.0, 0.5, -1.0, 2.0, 0.3, 0.3};
    double se = -1.0;
    CHECK(etsdm_sliced_wasserstein(pts, 4, pts, 4, 2, 16, 7, &v, &se) == ETSDM_OK);
    CHECK(v == 0.0);
    CHECK(se == 0.0);

    etsdm_schedule_spec spec;
    etsdm_schedule_spec_default(&spec);
    etsdm_schedule* s = nullptr;
    REQUIRE(etsdm_schedule_create(&spec, &s) == ETSDM_OK);
    const double grid[2] = {0.1, 0.9};
    double ratios[2];
    CHECK(etsdm_snr_ratio_curve(s, s, grid, 2, ratios) == ETSDM_OK);
    CHECK(ratios[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ratios[1] == doctest::Approx(1.0).epsilon(1e-12));
    etsdm_schedule_free(s);
}
