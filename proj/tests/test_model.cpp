#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "smjls/errors.hpp"
#include "smjls/expectation.hpp"
#include "smjls/model.hpp"

using namespace smjls;

namespace {

// trapezoid-free check: integrate the density with a fine Gauss-Legendre
// composite rule, add atom masses
double total_mass(const DwellLaw& law) {
    const GaussLegendreRule rule(32);
    double mass = 0.0;
    for (const Interval& iv : law.continuous_intervals()) {
        const int panels = 64;
        const double width = (iv.hi - iv.lo) / panels;
        for (int p = 0; p < panels; ++p) {
            const double lo = iv.lo + p * width;
            for (std::size_t k = 0; k < rule.nodes.size(); ++k)
                mass += 0.5 * width * rule.weights[k] *
                        law.density(lo + 0.5 * width * (1.0 + rule.nodes[k]));
        }
    }
    for (const Atom& a : law.atoms()) mass += a.mass;
    return mass;
}

std::vector<DwellLaw> all_law_kinds() {
    return {DwellLaw::uniform(1.0, 3.0), DwellLaw::truncated_weibull(10.0, 3.0, 0.1),
            DwellLaw::deterministic(0.5), DwellLaw::truncated_exponential(2.0, 4.0),
            DwellLaw::empirical({0.5, 1.0, 1.0, 2.5})};
}

} // namespace

TEST_CASE("dwell law masses integrate to one") {
    for (const DwellLaw& law : all_law_kinds()) CHECK(total_mass(law) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("uniform dwell cdf") {
    const double a = 0.7;
    const DwellLaw law = DwellLaw::uniform(a, 3 * a);
    CHECK(law.cdf(0.5 * a) == 0.0);
    CHECK(law.cdf(2 * a) == doctest::Approx(0.5));
    CHECK(law.cdf(4 * a) == 1.0);
    CHECK(law.support_max() == 3 * a);
}

TEST_CASE("truncated Weibull cut point and cdf") {
    const DwellLaw law = DwellLaw::truncated_weibull(10.0, 3.0, 0.1);
    const double t_cut = 3.0 * std::pow(std::log(10.0), 0.1);
    CHECK(law.support_max() == doctest::Approx(t_cut).epsilon(1e-12));
    CHECK(law.cdf(t_cut) == 1.0);
    CHECK(law.cdf(t_cut + 1.0) == 1.0);
    CHECK(law.cdf(0.999 * t_cut) < 0.91);
    REQUIRE(law.atoms().size() == 1);
    CHECK(law.atoms()[0].mass == doctest::Approx(0.1));
    CHECK(law.atoms()[0].time == doctest::Approx(t_cut));
}

TEST_CASE("deterministic dwell cdf") {
    const DwellLaw law = DwellLaw::deterministic(0.5);
    CHECK(law.cdf(0.49) == 0.0);
    CHECK(law.cdf(0.5) == 1.0);
}

TEST_CASE("bad dwell parameters are rejected") {
    CHECK_THROWS_AS(DwellLaw::uniform(2.0, 1.0), ModelError);
    CHECK_THROWS_AS(DwellLaw::uniform(-1.0, 1.0), ModelError);
    CHECK_THROWS_AS(DwellLaw::deterministic(0.0), ModelError);
    CHECK_THROWS_AS(DwellLaw::truncated_weibull(10.0, 3.0, 0.0), ModelError);
    CHECK_THROWS_AS(DwellLaw::truncated_exponential(0.0, 1.0), ModelError);
    CHECK_THROWS_AS(DwellLaw::empirical({}), ModelError);
    CHECK_THROWS_AS(DwellLaw::empirical({-0.5, 1.0}), ModelError);
}

TEST_CASE("deterministic sampling is constant") {
    const DwellLaw law = DwellLaw::deterministic(0.5);
    RandomStream rng(3);
    for (int k = 0; k < 100; ++k) CHECK(law.sample(rng) == 0.5);
}

TEST_CASE("uniform sampling matches its mean") {
    const DwellLaw law = DwellLaw::uniform(1.0, 3.0);
    RandomStream rng(5);
    double sum = 0.0;
    const int count = 100000;
    for (int k = 0; k < count; ++k) sum += law.sample(rng);
    CHECK(std::abs(sum / count - 2.0) < 0.01);
}

TEST_CASE("truncated Weibull atom frequency") {
    const DwellLaw law = DwellLaw::truncated_weibull(10.0, 3.0, 0.1);
    const double t_cut = law.support_max();
    RandomStream rng(7);
    int hits = 0;
    const int count = 100000;
    for (int k = 0; k < count; ++k)
        if (law.sample(rng) == t_cut) ++hits;
    CHECK(std::abs(static_cast<double>(hits) / count - 0.1) < 0.005);
}

TEST_CASE("empirical Kolmogorov-Smirnov fit of continuous laws") {
    for (const DwellLaw& law :
         {DwellLaw::uniform(1.0, 3.0), DwellLaw::truncated_weibull(10.0, 3.0, 0.1),
          DwellLaw::truncated_exponential(2.0, 4.0)}) {
        RandomStream rng(11);
        const int count = 100000;
        std::vector<double> samples(count);
        for (double& s : samples) s = law.sample(rng);
        std::sort(samples.begin(), samples.end());
        double ks = 0.0;
        double atom_freq = 0.0;
        const double t_atom = law.atoms().empty() ? -1.0 : law.atoms().front().time;
        for (int k = 0; k < count; ++k) {
            if (samples[static_cast<std::size_t>(k)] == t_atom) {
                atom_freq += 1.0 / count;
                continue;
            }
            const double empirical_hi = static_cast<double>(k + 1) / count;
            const double empirical_lo = static_cast<double>(k) / count;
            const double value = law.cdf(samples[static_cast<std::size_t>(k)]);
            ks = std::max(ks, std::max(std::abs(empirical_hi - value), std::abs(empirical_lo - value)));
        }
        CHECK(ks <= 0.01);
        if (t_atom > 0.0) CHECK(std::abs(atom_freq - law.atoms().front().mass) < 0.01);
    }
}

TEST_CASE("all samples stay inside the support") {
    for (const DwellLaw& law : all_law_kinds()) {
        RandomStream rng(13);
        for (int k = 0; k < 10000; ++k) {
            const double h = law.sample(rng);
            CHECK(h > 0.0);
            CHECK(h <= law.support_max());
        }
    }
}

TEST_CASE("jump mixtures validate weights and sample by mass") {
    Eigen::MatrixXd J1 = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd J2 = 2.0 * Eigen::MatrixXd::Ones(2, 2);
    CHECK_THROWS_AS(JumpMixture({{0.5, J1}, {0.6, J2}}), ModelError);
    CHECK_THROWS_AS(JumpMixture({{-0.1, J1}, {1.1, J2}}), ModelError);

    const JumpMixture mix({{0.25, J1}, {0.75, J2}});
    CHECK(mix.norm_bound() == doctest::Approx(4.0)); // spectral norm of 2*ones(2,2)
    RandomStream rng(17);
    int second = 0;
    const int count = 100000;
    for (int k = 0; k < count; ++k)
        if (mix.sample(rng)(0, 0) == 2.0) ++second;
    CHECK(std::abs(second / static_cast<double>(count) - 0.75) < 0.01);
}

TEST_CASE("the controller-failure model validates cleanly") {
    const SemiMarkovModel model = fixtures::controller_failure_model(1.0);
    const ValidationReport report = model.validate();
    CHECK(report.ok());
    CHECK(model.dwell_cap() == doctest::Approx(std::max(3.0, 3.0 * std::pow(std::log(10.0), 0.1))));
    CHECK(model.jump_norm_bound() == doctest::Approx(1.0));
}

TEST_CASE("validation pinpoints a non-Metzler mode") {
    SemiMarkovModel model = fixtures::controller_failure_model(1.0);
    Eigen::MatrixXd bad = model.mode(0);
    bad(0, 1) = -0.1;
    SemiMarkovModel broken({bad, model.mode(1)}, model.transition_matrix(), model.dwell_laws(),
                           model.jump_mixtures());
    const ValidationReport report = broken.validate();
    REQUIRE(!report.ok());
    CHECK(report.issues.front().message == "mode 1 not Metzler");
}

TEST_CASE("validation pinpoints a non-stochastic row") {
    SemiMarkovModel model = fixtures::controller_failure_model(1.0);
    Eigen::MatrixXd P = model.transition_matrix();
    P(0, 1) = 0.9;
    SemiMarkovModel broken(model.modes(), P, model.dwell_laws(), model.jump_mixtures());
    const ValidationReport report = broken.validate();
    REQUIRE(!report.ok());
    bool found = false;
    for (const ValidationIssue& issue : report.issues)
        if (issue.message == "row 1 not stochastic") found = true;
    CHECK(found);
}

TEST_CASE("validation flags a missing dwell law") {
    SemiMarkovModel model = fixtures::controller_failure_model(1.0);
    auto dwell = model.dwell_laws();
    dwell.erase({1, 0});
    SemiMarkovModel broken(model.modes(), model.transition_matrix(), dwell, model.jump_mixtures());
    CHECK(!broken.validate().ok());
}

TEST_CASE("markov generator validation") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
    Eigen::MatrixXd Q(2, 2);
    Q << -2.0, 2.0, 3.0, -3.0;
    CHECK(MarkovModel({A, A}, Q).validate().ok());

    Q(0, 1) = 2.5;
    CHECK(!MarkovModel({A, A}, Q).validate().ok()); // row sum broken

    Q << -2.0, 2.0, -0.5, 0.5;
    CHECK(!MarkovModel({A, A}, Q).validate().ok()); // negative off-diagonal
}

TEST_CASE("markov to semi-markov embedding") {
    Eigen::MatrixXd A1(2, 2), A2(2, 2), Q(2, 2);
    A1 << -1.0, 0.5, 0.2, -0.8;
    A2 << 0.3, 0.1, 0.4, -0.2;
    Q << -2.0, 2.0, 3.0, -3.0;
    const MarkovModel markov({A1, A2}, Q);
    const SemiMarkovModel semi = markov.to_semi_markov();
    CHECK(semi.validate().ok());
    CHECK(semi.transition_matrix()(0, 1) == doctest::Approx(1.0));
    CHECK(semi.transition_matrix()(1, 0) == doctest::Approx(1.0));
    const DwellLaw& law01 = semi.dwell(0, 1);
    CHECK(law01.support_max() == doctest::Approx(25.0)); // 50 / 2.0
    CHECK(law01.atoms().front().mass == doctest::Approx(std::exp(-50.0)));
}

TEST_CASE("next-mode sampling follows the transition row") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
    Eigen::MatrixXd P(3, 3);
    P << 0.2, 0.0, 0.8, 1.0, 0.0, 0.0, 0.3, 0.3, 0.4;
    std::map<SemiMarkovModel::EdgeKey, DwellLaw> dwell;
    std::map<SemiMarkovModel::EdgeKey, JumpMixture> jumps;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            if (P(i, j) <= 0.0) continue;
            dwell.emplace(SemiMarkovModel::EdgeKey{i, j}, DwellLaw::deterministic(1.0));
            jumps.emplace(SemiMarkovModel::EdgeKey{i, j}, JumpMixture::identity(2));
        }
    const SemiMarkovModel model({A, A, A}, P, std::move(dwell), std::move(jumps));

    RandomStream rng(23);
    const int count = 100000;
    Eigen::Vector3i hits = Eigen::Vector3i::Zero();
    for (int k = 0; k < count; ++k) hits(model.sample_next_mode(0, rng)) += 1;
    CHECK(hits(1) == 0); // zero-probability branch never drawn
    // five-sigma bands around the expected frequencies
    CHECK(std::abs(hits(0) / static_cast<double>(count) - 0.2) < 5.0 * std::sqrt(0.2 * 0.8 / count));
    CHECK(std::abs(hits(2) / static_cast<double>(count) - 0.8) < 5.0 * std::sqrt(0.2 * 0.8 / count));
}

TEST_CASE("shifted model adds alpha to every mode diagonal") {
    const SemiMarkovModel model = fixtures::controller_failure_model(1.0);
    const SemiMarkovModel shifted = model.shifted(0.1);
    CHECK((shifted.mode(0) - model.mode(0) - 0.1 * Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-15);
    CHECK((shifted.mode(1) - model.mode(1) - 0.1 * Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-15);
}
