#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dr/distill_losses.hpp"
#include "dr/errors.hpp"

using namespace dr;

namespace {

constexpr double kLn2 = 0.6931471805599453;
constexpr double kLn4 = 1.3862943611198906;

ToyPolicy random_policy(std::mt19937& rng, int contexts = 3, int vocab = 4) {
    ToyPolicy policy = ToyPolicy::uniform(contexts, vocab);
    for (double& p : policy.params) {
        p = (static_cast<double>(rng() % 20001) - 10000.0) / 5000.0;  // [-2, 2]
    }
    return policy;
}

PreferenceBatch random_batch_at_reference(std::mt19937& rng, const ToyPolicy& policy) {
    PreferenceBatch batch;
    const size_t n = 1 + rng() % 5;
    for (size_t i = 0; i < n; ++i) {
        PreferenceItem item;
        item.prompt_id = static_cast<int>(rng() % policy.contexts);
        const size_t wlen = 1 + rng() % 4;
        const size_t llen = 1 + rng() % 4;
        for (size_t k = 0; k < wlen; ++k) item.chosen_tokens.push_back(rng() % policy.vocab);
        for (size_t k = 0; k < llen; ++k) item.rejected_tokens.push_back(rng() % policy.vocab);
        item.ref_logp_chosen = seq_logprob(policy, item.prompt_id, item.chosen_tokens);
        item.ref_logp_rejected = seq_logprob(policy, item.prompt_id, item.rejected_tokens);
        batch.items.push_back(std::move(item));
    }
    return batch;
}

}  // namespace

TEST_CASE("seq_logprob on the uniform policy") {
    ToyPolicy policy = ToyPolicy::uniform(2, 4);
    std::vector<int> one{2};
    CHECK(seq_logprob(policy, 0, one) == doctest::Approx(-kLn4).epsilon(1e-12));
    std::vector<int> three{0, 1, 2};
    CHECK(seq_logprob(policy, 1, three) == doctest::Approx(-3 * kLn4).epsilon(1e-12));
}

TEST_CASE("seq_logprob with concentrated logits") {
    ToyPolicy policy = ToyPolicy::uniform(1, 4);
    policy.params[2] = 10.0;
    std::vector<int> tok{2};
    const double expected = -std::log1p(3.0 * std::exp(-10.0));
    CHECK(seq_logprob(policy, 0, tok) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(seq_logprob(policy, 0, tok) == doctest::Approx(-1.3619e-4).epsilon(1e-2));
}

TEST_CASE("seq_logprob rejects out-of-range tokens and contexts") {
    ToyPolicy policy = ToyPolicy::uniform(2, 4);
    std::vector<int> bad{4};
    CHECK_THROWS_AS(seq_logprob(policy, 0, bad), ValidationError);
    std::vector<int> ok{0};
    CHECK_THROWS_AS(seq_logprob(policy, 2, ok), ValidationError);
    std::vector<int> empty;
    CHECK_THROWS_AS(seq_logprob(policy, 0, empty), ValidationError);
}

TEST_CASE("sft_loss on the uniform policy is ln(vocab) per token") {
    ToyPolicy policy = ToyPolicy::uniform(3, 4);
    std::vector<SftItem> batch = {{0, {1, 2, 3}}, {1, {0}}, {2, {2, 2}}};
    CHECK(sft_loss(policy, batch) == doctest::Approx(kLn4).epsilon(1e-12));

    SUBCASE("sum normalization multiplies by length") {
        LossConfig cfg;
        cfg.nll_normalization = NllNormalization::sum;
        const double expected = (3 * kLn4 + kLn4 + 2 * kLn4) / 3.0;
        CHECK(sft_loss(policy, batch, cfg) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("a perfectly concentrated policy drives the loss to zero") {
        ToyPolicy sharp = ToyPolicy::uniform(1, 4);
        sharp.params[1] = 60.0;
        std::vector<SftItem> one = {{0, {1}}};
        CHECK(sft_loss(sharp, one) < 1e-20);
        CHECK(sft_loss(sharp, one) >= 0.0);
    }
    SUBCASE("two-example batch averages the per-example values") {
        std::vector<SftItem> a = {{0, {1}}};
        std::vector<SftItem> b = {{1, {0, 2}}};
        std::vector<SftItem> both = {a[0], b[0]};
        const double expected = (sft_loss(policy, a) + sft_loss(policy, b)) / 2.0;
        CHECK(sft_loss(policy, both) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("empty batch throws") {
        std::vector<SftItem> empty;
        CHECK_THROWS_AS(sft_loss(policy, empty), ValidationError);
    }
}

TEST_CASE("tdpo_loss at the reference policy is ln 2") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        ToyPolicy policy = random_policy(rng);
        PreferenceBatch batch = random_batch_at_reference(rng, policy);
        for (double beta : {0.05, 0.1, 1.0}) {
            LossConfig cfg;
            cfg.beta = beta;
            TdpoResult result = tdpo_loss(policy, batch, cfg);
            CHECK(std::abs(result.loss - kLn2) <= 1e-12);
            for (double m : result.margins) CHECK(m == 0.0);
        }
    }
}

TEST_CASE("tdpo_loss scalar oracle values") {
    // One item with margin components +1 and -1: margin = beta * 2.
    ToyPolicy policy = ToyPolicy::uniform(1, 4);
    PreferenceBatch batch;
    PreferenceItem item;
    item.prompt_id = 0;
    item.chosen_tokens = {0};
    item.rejected_tokens = {1};
    item.ref_logp_chosen = seq_logprob(policy, 0, item.chosen_tokens) - 1.0;
    item.ref_logp_rejected = seq_logprob(policy, 0, item.rejected_tokens) + 1.0;
    batch.items.push_back(item);

    LossConfig cfg;
    cfg.beta = 1.0;
    TdpoResult result = tdpo_loss(policy, batch, cfg);
    CHECK(result.margins[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(result.loss == doctest::Approx(0.126928011).epsilon(1e-9));

    // Swap the shifts: margin -2.
    batch.items[0].ref_logp_chosen += 2.0;
    batch.items[0].ref_logp_rejected -= 2.0;
    result = tdpo_loss(policy, batch, cfg);
    CHECK(result.margins[0] == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(result.loss == doctest::Approx(2.126928011).epsilon(1e-9));
}

TEST_CASE("tdpo_loss input validation") {
    ToyPolicy policy = ToyPolicy::uniform(1, 4);
    PreferenceBatch empty;
    LossConfig cfg;
    CHECK_THROWS_AS(tdpo_loss(policy, empty, cfg), ValidationError);

    PreferenceBatch batch;
    batch.items.push_back(PreferenceItem{0, {0}, {1}, 0.0, 0.0});
    cfg.beta = 0.0;
    CHECK_THROWS_AS(tdpo_loss(policy, batch, cfg), ValidationError);
}

TEST_CASE("margins ignore a common shift of both references") {
    std::mt19937 rng(23);
    ToyPolicy policy = random_policy(rng);
    PreferenceBatch batch = random_batch_at_reference(rng, policy);
    LossConfig cfg;
    cfg.beta = 0.7;
    TdpoResult base = tdpo_loss(policy, batch, cfg);

    PreferenceBatch shifted = batch;
    for (PreferenceItem& item : shifted.items) {
        item.ref_logp_chosen += 3.25;
        item.ref_logp_rejected += 3.25;
    }
    TdpoResult moved = tdpo_loss(policy, shifted, cfg);
    for (size_t i = 0; i < base.margins.size(); ++i) {
        CHECK(moved.margins[i] == doctest::Approx(base.margins[i]).epsilon(1e-12));
    }
    CHECK(moved.loss == doctest::Approx(base.loss).epsilon(1e-12));
}

TEST_CASE("tdpo_loss decreases as a margin grows") {
    ToyPolicy policy = ToyPolicy::uniform(1, 4);
    LossConfig cfg;
    cfg.beta = 1.0;
    double previous = std::numeric_limits<double>::infinity();
    for (double shift : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
        PreferenceBatch batch;
        PreferenceItem item{0, {0}, {1}, 0.0, 0.0};
        item.ref_logp_chosen = seq_logprob(policy, 0, item.chosen_tokens) - shift;
        item.ref_logp_rejected = seq_logprob(policy, 0, item.rejected_tokens);
        batch.items.push_back(item);
        const double loss = tdpo_loss(policy, batch, cfg).loss;
        CHECK(loss < previous);
        previous = loss;
    }
}

TEST_CASE("rpo_loss composition") {
    std::mt19937 rng(31);
    ToyPolicy policy = random_policy(rng);
    PreferenceBatch batch = random_batch_at_reference(rng, policy);

    SUBCASE("alpha 0 reduces to tdpo") {
        LossConfig cfg;
        cfg.alpha = 0.0;
        CHECK(rpo_loss(policy, batch, cfg) ==
              doctest::Approx(tdpo_loss(policy, batch, cfg).loss).epsilon(1e-15));
    }
    SUBCASE("uniform policy, single token: ln 2 + ln 4") {
        ToyPolicy uniform = ToyPolicy::uniform(1, 4);
        PreferenceBatch b;
        PreferenceItem item{0, {0}, {1}, -kLn4, -kLn4};
        b.items.push_back(item);
        LossConfig cfg;
        cfg.alpha = 1.0;
        CHECK(rpo_loss(uniform, b, cfg) == doctest::Approx(kLn2 + kLn4).epsilon(1e-12));
        CHECK(rpo_loss(uniform, b, cfg) == doctest::Approx(2.079441542).epsilon(1e-9));
    }
    SUBCASE("doubling alpha doubles the NLL term") {
        LossConfig cfg;
        cfg.alpha = 1.0;
        const double tdpo = tdpo_loss(policy, batch, cfg).loss;
        const double one = rpo_loss(policy, batch, cfg) - tdpo;
        cfg.alpha = 2.0;
        const double two = rpo_loss(policy, batch, cfg) - tdpo;
        CHECK(two == doctest::Approx(2.0 * one).epsilon(1e-12));
    }
}

TEST_CASE("gradients match central finite differences") {
    std::mt19937 rng(47);
    ToyPolicy policy = random_policy(rng, 3, 4);

    std::vector<SftItem> sft_batch = {{0, {1, 2}}, {1, {3}}, {2, {0, 0, 2}}};
    PreferenceBatch pref;
    for (int c = 0; c < 3; ++c) {
        PreferenceItem item;
        item.prompt_id = c;
        item.chosen_tokens = {c % 4, (c + 1) % 4};
        item.rejected_tokens = {(c + 2) % 4};
        item.ref_logp_chosen = -1.1 * (c + 1);
        item.ref_logp_rejected = -2.3;
        pref.items.push_back(item);
    }
    LossConfig cfg;  // defaults: beta 0.1, alpha 1

    LossFn sft_fn{[&](const ToyPolicy& p) { return sft_loss(p, sft_batch, cfg); },
                  [&](const ToyPolicy& p) { return sft_loss_grad(p, sft_batch, cfg); }};
    CHECK(grad_check(sft_fn, policy, 1e-5) < 1e-6);

    LossFn tdpo_fn{[&](const ToyPolicy& p) { return tdpo_loss(p, pref, cfg).loss; },
                   [&](const ToyPolicy& p) { return tdpo_loss_grad(p, pref, cfg); }};
    CHECK(grad_check(tdpo_fn, policy, 1e-5) < 1e-6);

    LossFn rpo_fn{[&](const ToyPolicy& p) { return rpo_loss(p, pref, cfg); },
                  [&](const ToyPolicy& p) { return rpo_loss_grad(p, pref, cfg); }};
    CHECK(grad_check(rpo_fn, policy, 1e-5) < 1e-6);

    SUBCASE("sum normalization as well") {
        cfg.nll_normalization = NllNormalization::sum;
        CHECK(grad_check(sft_fn, policy, 1e-5) < 1e-6);
        CHECK(grad_check(rpo_fn, policy, 1e-5) < 1e-6);
    }
    SUBCASE("grad_check rejects non-positive eps") {
        CHECK_THROWS_AS(grad_check(sft_fn, policy, 0.0), ValidationError);
    }
}

TEST_CASE("one descent step from the reference increases the mean margin") {
    std::mt19937 rng(53);
    for (int trial = 0; trial < 10; ++trial) {
        ToyPolicy policy = random_policy(rng);
        PreferenceBatch batch = random_batch_at_reference(rng, policy);
        LossConfig cfg;
        cfg.beta = 0.1;

        const std::vector<double> grad = tdpo_loss_grad(policy, batch, cfg);
        ToyPolicy stepped = policy;
        for (size_t i = 0; i < grad.size(); ++i) stepped.params[i] -= 0.05 * grad[i];

        TdpoResult before = tdpo_loss(policy, batch, cfg);
        TdpoResult after = tdpo_loss(stepped, batch, cfg);
        double mean_before = 0.0;
        double mean_after = 0.0;
        for (double m : before.margins) mean_before += m;
        for (double m : after.margins) mean_after += m;
        mean_before /= static_cast<double>(before.margins.size());
        mean_after /= static_cast<double>(after.margins.size());
        CHECK(mean_before == 0.0);
        CHECK(mean_after > mean_before);
        CHECK(after.loss < before.loss);
    }
}

TEST_CASE("losses stay finite for extreme logits") {
    ToyPolicy policy = ToyPolicy::uniform(2, 4);
    policy.params = {500.0, -500.0, 420.0, -1.0, -500.0, 500.0, 0.0, 3.0};
    std::vector<SftItem> batch = {{0, {1}}, {1, {0, 3}}};
    CHECK(std::isfinite(sft_loss(policy, batch)));

    PreferenceBatch pref;
    pref.items.push_back(PreferenceItem{0, {0, 1}, {2}, -3.0, -1.0});
    pref.items.push_back(PreferenceItem{1, {0}, {1, 1}, -0.5, -800.0});
    LossConfig cfg;
    CHECK(std::isfinite(tdpo_loss(policy, pref, cfg).loss));
    CHECK(std::isfinite(rpo_loss(policy, pref, cfg)));
}
