#include "doctest.h"
#include "support.hpp"

using namespace mcr;
using namespace testing;

namespace {

Instance four_point() {
    Instance inst;
    auto& d = inst.data;
    d.y = vec({-1.2, 0.3, 2.2, 3.1});
    d.x = (Mat(4, 1) << 0.4, -0.3, 0.9, -1.0).finished();
    d.z = sparse_from_dense((Mat(4, 2) << 1, 0, 0, 0, 1, 1, 0, 1).finished());
    inst.truth.mixture = {vec({0.4, 0.6}), vec({-1, 2.5}), vec({0.3}), 0.9};
    inst.truth.response.probs = (Mat(2, 2) << 0.3, 0.2, 0.6, 0.7).finished();
    return inst;
}

// One update written with naive densities.
Vec hand_feature_step(const Datasetd& d, const MixtureParamsd& m, Index j, const Vec& pj) {
    const Mat z = dense(d.z);
    const Index k = m.k();
    Vec hits = Vec::Zero(k), mass = Vec::Zero(k);
    for (Index i = 0; i < d.n(); ++i) {
        Vec w(k);
        for (Index c = 0; c < k; ++c) w(c) = naive_gaussian(d, m, i, c) * (z(i, j) != 0 ? pj(c) : 1 - pj(c));
        w /= w.sum();
        mass += w;
        if (z(i, j) != 0) hits += w;
    }
    return hits.cwiseQuotient(mass);
}


}  // namespace

TEST_SUITE("feature-em") {

TEST_CASE("loglik_feature matches naive products") {
    const Instance inst = four_point();
    for (Index j = 0; j < 2; ++j) {
        const Vec pj = inst.truth.response.probs.col(j);
        CHECK(std::abs(loglik_feature(inst.data, inst.truth.mixture, j, pj) -
                       naive_loglik_feature(inst.data, inst.truth.mixture, j, pj)) < 1e-9);
    }
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Instance r = random_instance(300 + s, 20, 3, 2, 4);
        for (Index j = 0; j < 4; ++j) {
            const Vec pj = r.truth.response.probs.col(j);
            CHECK(loglik_feature(r.data, r.truth.mixture, j, pj) ==
                  doctest::Approx(naive_loglik_feature(r.data, r.truth.mixture, j, pj)).epsilon(1e-12));
        }
    }
}

TEST_CASE("one class factorizes into a Bernoulli term plus a constant") {
    Instance inst = random_instance(7, 30, 1, 2, 3);
    const Mat z = dense(inst.data.z);
    const double c0 = loglik_limited(inst.data, inst.truth.mixture);
    for (double p : {0.1, 0.37, 0.8}) {
        const double ones = z.col(1).sum();
        const double bern = ones * std::log(p) + (30 - ones) * std::log(1 - p);
        CHECK(loglik_feature(inst.data, inst.truth.mixture, 1, vec({p})) == doctest::Approx(c0 + bern).epsilon(1e-13));
    }
}

TEST_CASE("an all-ones column is increasing in every probability") {
    Instance inst = random_instance(8, 10, 2, 1, 1);
    inst.data.z = sparse_from_dense(Mat::Ones(10, 1));
    const auto& m = inst.truth.mixture;
    double prev = -std::numeric_limits<double>::infinity();
    for (double p = 0.05; p < 1; p += 0.1) {
        const double v = loglik_feature(inst.data, m, 0, vec({p, 0.5}));
        CHECK(v > prev);
        prev = v;
    }
    CHECK(loglik_feature(inst.data, m, 0, vec({0.5, 0.6})) > loglik_feature(inst.data, m, 0, vec({0.5, 0.5})));
}

TEST_CASE("argument errors") {
    const Instance inst = four_point();
    CHECK_THROWS_AS(loglik_feature(inst.data, inst.truth.mixture, 2, vec({0.5, 0.5})), ColumnOutOfRange);
    CHECK_THROWS_AS(loglik_feature(inst.data, inst.truth.mixture, -1, vec({0.5, 0.5})), ColumnOutOfRange);
    CHECK_THROWS_AS(loglik_feature(inst.data, inst.truth.mixture, 0, vec({0.5})), DimensionMismatch);
    CHECK_THROWS_AS(em_step_feature(inst.data, inst.truth.mixture, 0, vec({0.0, 0.5})), InvariantViolation);
}

TEST_CASE("em_step_feature matches the update formula") {
    const Instance inst = four_point();
    for (Index j = 0; j < 2; ++j) {
        const Vec start = vec({0.35, 0.55});
        const Vec got = em_step_feature(inst.data, inst.truth.mixture, j, start);
        const Vec want = hand_feature_step(inst.data, inst.truth.mixture, j, start);
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("one class: the column mean is reached in one step and kept") {
    const Instance inst = random_instance(9, 40, 1, 2, 3);
    const Mat z = dense(inst.data.z);
    const Vec step = em_step_feature(inst.data, inst.truth.mixture, 2, vec({0.5}));
    CHECK(step(0) == doctest::Approx(z.col(2).mean()).epsilon(1e-14));
    CHECK(em_step_feature(inst.data, inst.truth.mixture, 2, step)(0) == doctest::Approx(step(0)).epsilon(1e-14));
    const auto probs = fit_response_probs(inst.data, inst.truth.mixture);
    for (Index j = 0; j < 3; ++j) CHECK(probs.probs(0, j) == doctest::Approx(z.col(j).mean()).epsilon(1e-12));
}

TEST_CASE("zero and one columns sit at the clamp") {
    Instance inst = random_instance(10, 12, 2, 1, 2);
    Mat z = Mat::Zero(12, 2);
    z.col(1).setOnes();
    inst.data.z = sparse_from_dense(z);
    const Vec a = em_step_feature(inst.data, inst.truth.mixture, 0, vec({0.5, 0.5}));
    CHECK(a(0) == 1e-4);
    CHECK(a(1) == 1e-4);
    const auto probs = fit_response_probs(inst.data, inst.truth.mixture);
    CHECK(probs.probs.col(0).isConstant(1e-4));
    CHECK(probs.probs.col(1).isConstant(1 - 1e-4));
    CHECK_NOTHROW(validate(probs));
}

TEST_CASE("per-column ascent") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Index k = 1 + Index(s % 3);
        const Instance inst = random_instance(400 + s, 50, k, 2, 3);
        for (Index j = 0; j < 3; ++j) {
            Vec pj = Vec::Constant(k, 0.5);
            double prev = loglik_feature(inst.data, inst.truth.mixture, j, pj);
            for (int it = 0; it < 40; ++it) {
                pj = em_step_feature(inst.data, inst.truth.mixture, j, pj);
                const double cur = loglik_feature(inst.data, inst.truth.mixture, j, pj);
                CHECK(cur - prev >= -1e-10 * std::abs(prev));
                prev = cur;
            }
        }
    }
}

TEST_CASE("fit_response_probs attains the grid maximum") {
    for (std::uint64_t s = 0; s < 4; ++s) {
        const Instance inst = random_instance(500 + s, 6, 2, 1, 2);
        const auto probs = fit_response_probs(inst.data, inst.truth.mixture);
        for (Index j = 0; j < 2; ++j) {
            const double em = naive_loglik_feature(inst.data, inst.truth.mixture, j, Vec(probs.probs.col(j)));
            const double grid = grid_max(inst.data, inst.truth.mixture, j, 0.01, 0.99);
            // The fit is constrained to the wider [1e-4, 1 - 1e-4] box.
            CHECK(em >= grid - 1e-6);
        }
    }
}

TEST_CASE("columns are independent") {
    const Instance inst = random_instance(600, 60, 3, 2, 7);
    const auto probs = fit_response_probs(inst.data, inst.truth.mixture);
    Mat z = dense(inst.data.z);
    const std::vector<Index> order{4, 0, 6, 2, 5, 1, 3};
    Mat zp(60, 7);
    for (Index c = 0; c < 7; ++c) zp.col(c) = z.col(order[std::size_t(c)]);
    Datasetd d2 = inst.data;
    d2.z = sparse_from_dense(zp);
    const auto probs2 = fit_response_probs(d2, inst.truth.mixture);
    for (Index c = 0; c < 7; ++c) CHECK(probs2.probs.col(c) == probs.probs.col(order[std::size_t(c)]));

    FeatureEmConfig threaded;
    threaded.threads = 3;
    CHECK(fit_response_probs(inst.data, inst.truth.mixture, threaded).probs == probs.probs);
}

TEST_CASE("plug-in weights depend on rows and classes only") {
    const Instance inst = random_instance(610, 25, 2, 1, 3);
    const GaussianPlugin<double> g(inst.data, inst.truth.mixture);
    const auto w = posterior_limited(inst.data, inst.truth.mixture);
    CHECK((g.omega - w.weights).cwiseAbs().maxCoeff() < 1e-15);
    for (Index i = 0; i < 25; ++i) {
        double s = 0;
        for (Index c = 0; c < 2; ++c) s += naive_gaussian(inst.data, inst.truth.mixture, i, c);
        CHECK(g.row_log_norm(i) == doctest::Approx(std::log(s)).epsilon(1e-13));
    }
}

TEST_CASE("degenerate class weights are reported with the column") {
    Instance inst = random_instance(620, 20, 1, 1, 2);
    MixtureParamsd m{vec({0.5, 0.5}), vec({0, 1e6}), inst.truth.mixture.slopes, 1.0};
    CHECK_THROWS_AS(em_step_feature(inst.data, m, 0, vec({0.5, 0.5})), DegenerateWeights);
    try {
        fit_response_probs(inst.data, m);
        FAIL("expected DegenerateWeights");
    } catch (const DegenerateWeights& e) {
        CHECK(std::string(e.what()).find(" 0(class 1)") != std::string::npos);
    }
}

}
