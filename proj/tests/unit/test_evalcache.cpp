#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "tblm/evalcache.hpp"

using namespace tblm;

namespace {

struct Case {
    Topology topo;
    Dataset data;
    BitGenome genome;
};

Dataset make_random_rows(Rng& rng, std::size_t n_in, std::size_t n_out, std::size_t rows, bool binary_targets) {
    Dataset d;
    d.n_inputs = n_in;
    d.n_outputs = n_out;
    std::vector<double> in(n_in), out(n_out);
    for (std::size_t r = 0; r < rows; ++r) {
        for (auto& v : in) v = rng.uniform(-1, 1);
        for (auto& v : out) v = binary_targets ? static_cast<double>(rng.below(2)) : rng.uniform(0, 1);
        d.push_back(in, out);
    }
    return d;
}

Case random_case(Rng& rng, LossKind loss) {
    std::vector<std::size_t> sizes{1 + rng.below(10)};
    const std::size_t hidden = rng.below(3);
    for (std::size_t h = 0; h < hidden; ++h) sizes.push_back(1 + rng.below(50));
    sizes.push_back(1 + rng.below(10));
    std::vector<Transfer> tf;
    for (std::size_t l = 1; l + 1 < sizes.size(); ++l) tf.push_back(rng.coin() ? Transfer::symmetric_sigmoid : Transfer::logistic);
    tf.push_back(loss == LossKind::cross_entropy ? Transfer::logistic : static_cast<Transfer>(rng.below(3)));
    Topology t(sizes, tf);
    const WeightFormat f(2 + static_cast<int>(rng.below(15)), rng.uniform(0.5, 8.0));
    BitGenome g = oracle::random_genome(t, f, rng);
    Dataset d = make_random_rows(rng, sizes.front(), sizes.back(), 1 + rng.below(100), loss == LossKind::cross_entropy);
    return {t, d, g};
}

double full_loss(const Topology& t, const BitGenome& g, LossKind k, const Dataset& d) {
    std::vector<double> pred;
    for (std::size_t p = 0; p < d.size(); ++p) {
        const auto o = oracle::forward(t, g, std::vector<double>(d.input(p).begin(), d.input(p).end()));
        pred.insert(pred.end(), o.begin(), o.end());
    }
    return k == LossKind::rmse ? oracle::rmse(pred, d.targets, d.size(), d.n_outputs) : oracle::cross_entropy(pred, d.targets);
}

}  // namespace

TEST_CASE("probe matches full recomputation") {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const LossKind k = trial % 3 == 0 ? LossKind::cross_entropy : LossKind::rmse;
        Case c = random_case(rng, k);
        const ActivationCache cache(c.topo, k, c.data, c.genome);
        const std::size_t bit = rng.below(c.genome.n_bits());
        const double before = full_loss(c.topo, c.genome, k, c.data);
        BitGenome flipped = c.genome;
        flipped.flip_bit(bit);
        const double after = full_loss(c.topo, flipped, k, c.data);
        const double got = cache.probe_move(c.genome, bit);
        worst = std::max(worst, std::fabs(got - (after - before)));
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("cache matches the oracle and rebuild is idempotent") {
    Rng rng(8);
    Case c = random_case(rng, LossKind::rmse);
    ActivationCache cache(c.topo, LossKind::rmse, c.data, c.genome);
    for (std::size_t p = 0; p < c.data.size(); ++p) {
        const auto want = oracle::forward(c.topo, c.genome, std::vector<double>(c.data.input(p).begin(), c.data.input(p).end()));
        for (std::size_t k = 0; k < want.size(); ++k)
            REQUIRE(std::fabs(cache.network_outputs()[p * want.size() + k] - want[k]) <= 1e-12);
    }
    CHECK(cache.base_loss() == doctest::Approx(full_loss(c.topo, c.genome, LossKind::rmse, c.data)).epsilon(1e-12));
    const std::vector<double> before(cache.network_outputs().begin(), cache.network_outputs().end());
    cache.rebuild(c.genome);
    CHECK(std::vector<double>(cache.network_outputs().begin(), cache.network_outputs().end()) == before);
    CHECK(cache.max_deviation_from(c.genome) == 0.0);
}

TEST_CASE("identity net caches its input") {
    const Topology t({1, 1}, {Transfer::linear});
    const WeightFormat f(8, 1.0);
    BitGenome g(f, t.layout());
    g.set_multiplier(0, f.max_multiplier());
    Dataset d;
    d.n_inputs = d.n_outputs = 1;
    const double x = 0.3, y = 0.0;
    d.push_back({&x, 1}, {&y, 1});
    const ActivationCache c(t, LossKind::rmse, d, g);
    CHECK(c.pre_activations(1)[0] == doctest::Approx(x).epsilon(1e-15));
    CHECK(c.outputs(1)[0] == doctest::Approx(x).epsilon(1e-15));
}

TEST_CASE("probe does not mutate; flip and reverse cancel") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        Case c = random_case(rng, LossKind::rmse);
        ActivationCache cache(c.topo, LossKind::rmse, c.data, c.genome);
        const BitGenome g0 = c.genome;
        const std::vector<double> out0(cache.network_outputs().begin(), cache.network_outputs().end());
        const double sum0 = cache.term_sum();
        const std::size_t bit = rng.below(c.genome.n_bits());
        const double d1 = cache.probe_move(c.genome, bit);
        CHECK(c.genome == g0);
        CHECK(cache.term_sum() == sum0);
        CHECK(std::vector<double>(cache.network_outputs().begin(), cache.network_outputs().end()) == out0);
        cache.commit_move(c.genome, bit);
        const double d2 = cache.probe_move(c.genome, bit);
        CHECK(std::fabs(d1 + d2) <= 1e-9);
    }
}

TEST_CASE("commits keep the cache consistent") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const LossKind k = trial % 2 ? LossKind::rmse : LossKind::cross_entropy;
        Case c = random_case(rng, k);
        ActivationCache cache(c.topo, k, c.data, c.genome);
        for (int step = 0; step < 100; ++step) {
            const std::size_t bit = rng.below(c.genome.n_bits());
            const double predicted = cache.base_loss() + cache.probe_move(c.genome, bit);
            cache.commit_move(c.genome, bit);
            REQUIRE(cache.max_deviation_from(c.genome) <= 1e-9);
            REQUIRE(std::fabs(cache.base_loss() - predicted) <= 1e-9);
        }
    }
}

TEST_CASE("zero-delta commit leaves the loss unchanged") {
    const Topology t = Topology::parse("2-3-1");
    const WeightFormat f(6, 1.0);
    BitGenome g(f, t.layout());
    Dataset d;
    d.n_inputs = 2;
    d.n_outputs = 1;
    const double in[2] = {0.0, 0.5}, out = 1.0;
    d.push_back(in, {&out, 1});
    ActivationCache c(t, LossKind::rmse, d, g);
    const double before = c.base_loss();
    // First input is zero, so its weights cannot change the loss.
    const std::size_t bit = t.layout().index_of({1, 0, 0, ParamKind::weight}) * 6 + 5;
    CHECK(c.probe_move(g, bit) == 0.0);
    c.commit_move(g, bit);
    CHECK(std::fabs(c.base_loss() - before) <= 1e-12);
}

TEST_CASE("operation counts follow the layer of the changed weight") {
    Rng rng(4);
    const std::size_t n0 = 6, n1 = 9, n2 = 4, rows = 25;
    const Topology t = Topology::parse("6-9-4", Transfer::symmetric_sigmoid, Transfer::logistic);
    const WeightFormat f(12, 3.0);
    BitGenome g = oracle::random_genome(t, f, rng);
    const Dataset d = make_random_rows(rng, n0, n2, rows, false);
    const ActivationCache c(t, LossKind::rmse, d, g);
    const auto nb = static_cast<std::size_t>(f.n_bits());
    auto count = [&](const ParamCoord& pc) {
        ProbeCounters k;
        (void)c.probe_move(g, t.layout().index_of(pc) * nb + nb - 1, &k);
        return k;
    };
    // output weight: one neuron per sample
    auto k_out = count({2, 1, 3, ParamKind::weight});
    CHECK(k_out.sample_visits == rows);
    CHECK(k_out.neuron_updates == rows);
    auto k_bias_out = count({2, 0, 0, ParamKind::bias});
    CHECK(k_bias_out.neuron_updates == rows);
    // input-layer weight: the hidden neuron plus every output, 1 + n2 per sample
    auto k_in = count({1, 5, 2, ParamKind::weight});
    CHECK(k_in.neuron_updates == rows * (1 + n2));
    // a full forward pass would update n1 + n2 neurons per sample
    CHECK(k_out.neuron_updates * (n1 + n2) < rows * (n1 + n2) * 2);
}

TEST_CASE("dataset evaluator adds the regularization change") {
    Rng rng(31);
    const Topology t = Topology::parse("3-5-2", Transfer::symmetric_sigmoid, Transfer::logistic);
    const WeightFormat f(8, 2.0);
    const BitGenome g = oracle::random_genome(t, f, rng);
    const Dataset tr = make_random_rows(rng, 3, 2, 40, false), va = make_random_rows(rng, 3, 2, 20, false);
    const LossSpec spec{LossKind::rmse, 0.7};
    DatasetEvaluator ev(t, spec, tr, va, g);
    CHECK(ev.objective() == doctest::Approx(total_loss(full_loss(t, g, LossKind::rmse, tr), g, spec)).epsilon(1e-12));
    for (int i = 0; i < 200; ++i) {
        const std::size_t bit = rng.below(g.n_bits());
        BitGenome h = ev.genome();
        h.flip_bit(bit);
        const double want = total_loss(full_loss(t, h, LossKind::rmse, tr), h, spec) - ev.objective();
        REQUIRE(std::fabs(ev.probe(bit) - want) <= 1e-9);
        if (i % 3 == 0) ev.commit(bit);
    }
    CHECK(ev.validation_loss() == doctest::Approx(full_loss(t, ev.genome(), LossKind::rmse, va)).epsilon(1e-12));
    CHECK_THROWS(ActivationCache(Topology::parse("2-3-1", Transfer::symmetric_sigmoid, Transfer::linear, true), LossKind::rmse,
                                 make_random_rows(rng, 2, 1, 3, false), BitGenome(f, Topology::parse("2-3-1").layout())));
}
