#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "attrib/agreement.hpp"
#include "attrib/metrics.hpp"
#include "support/oracles.hpp"

using namespace attrib;
using namespace attrib::metrics;

TEST(SetPrf, MatchesRationalOracleOnAllSubsetPairs) {
    for (std::uint32_t p = 0; p < 32; ++p) {
        for (std::uint32_t r = 0; r < 32; ++r) {
            const auto got = set_prf(oracle::to_set(p), oracle::to_set(r));
            const auto want = oracle::prf(p, r);
            ASSERT_EQ(got.precision, want.p.value()) << p << " " << r;
            ASSERT_EQ(got.recall, want.r.value()) << p << " " << r;
            ASSERT_EQ(got.f1, want.f.value()) << p << " " << r;
        }
    }
}

TEST(SetPrf, SpotValues) {
    auto s = set_prf({7, 9}, {9});
    EXPECT_NEAR(s.precision, 0.5, 1e-12);
    EXPECT_NEAR(s.recall, 1.0, 1e-12);
    EXPECT_NEAR(s.f1, 2.0 / 3.0, 1e-12);
    s = set_prf({9, 10}, {9, 10, 11});
    EXPECT_NEAR(s.precision, 1.0, 1e-12);
    EXPECT_NEAR(s.recall, 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(s.f1, 0.8, 1e-12);
    EXPECT_EQ(set_prf({9}, {9}), (Scores{1, 1, 1}));
    EXPECT_EQ(set_prf({}, {9}), (Scores{0, 0, 0}));
    EXPECT_EQ(set_prf({9}, {}), (Scores{0, 0, 0}));
    EXPECT_EQ(set_prf({}, {}), (Scores{1, 1, 1}));
}

TEST(SetPrf, SwapExchangesPrecisionAndRecall) {
    std::mt19937 rng(3);
    for (int i = 0; i < 500; ++i) {
        const auto a = oracle::to_set((rng() & 0xff) | 1);
        const auto b = oracle::to_set((rng() & 0xff) | 2);
        const auto ab = set_prf(a, b), ba = set_prf(b, a);
        EXPECT_EQ(ab.precision, ba.recall);
        EXPECT_EQ(ab.f1, ba.f1);
        EXPECT_LE(ab.f1, 1.0);
        bool overlap = false;
        for (int x : a) overlap |= b.count(x) > 0;
        EXPECT_EQ(ab.f1 == 0.0, !overlap);
    }
}

TEST(RetrievalPrf, Examples) {
    EXPECT_EQ(retrieval_prf({9, 10, 11}, {9, 10, 11}), (Scores{1, 1, 1}));
    const auto s = retrieval_prf({6, 9}, {9, 10, 11});
    EXPECT_NEAR(s.precision, 0.5, 1e-12);
    EXPECT_NEAR(s.recall, 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(s.f1, 0.4, 1e-12);
}

TEST(AggregateClaimFull, ComponentMean) {
    const std::vector<Scores> one{{1, 1, 1}};
    EXPECT_EQ(aggregate_claim_full(one), (Scores{1, 1, 1}));
    const std::vector<Scores> two{{1, 1, 1}, {0, 0, 0}};
    EXPECT_EQ(aggregate_claim_full(two), (Scores{0.5, 0.5, 0.5}));
    EXPECT_THROW(aggregate_claim_full({}), PreconditionError);

    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u;
    std::vector<Scores> five;
    for (int i = 0; i < 5; ++i) five.push_back({u(rng), u(rng), u(rng)});
    long double p = 0, r = 0, f = 0;
    for (const auto& s : five) {
        p += s.precision;
        r += s.recall;
        f += s.f1;
    }
    const auto got = aggregate_claim_full(five);
    EXPECT_NEAR(got.precision, static_cast<double>(p / 5), 1e-15);
    EXPECT_NEAR(got.recall, static_cast<double>(r / 5), 1e-15);
    EXPECT_NEAR(got.f1, static_cast<double>(f / 5), 1e-15);
}

TEST(FullyAttributed, Rules) {
    const std::map<std::string, std::vector<double>> m{{"c1", {1, 1, 1}}, {"c2", {0.5, 1}}};
    EXPECT_DOUBLE_EQ(fully_attributed_proportion(m, 0.6), 0.5);
    EXPECT_DOUBLE_EQ(fully_attributed_proportion(m, 0.0), 1.0);
    // mean of c2 is 0.75, so it passes under the mean rule
    EXPECT_DOUBLE_EQ(fully_attributed_proportion(m, 0.6, ThresholdMode::kMean), 1.0);
    EXPECT_DOUBLE_EQ(fully_attributed_proportion({{"a", {0.6}}}, 0.6), 1.0);
    EXPECT_THROW(fully_attributed_proportion(m, 1.5), PreconditionError);
    EXPECT_THROW(fully_attributed_proportion({}, 0.6), PreconditionError);
}

TEST(Entropy, Examples) {
    const std::vector<int> certain{0, 0, 4, 0}, even{1, 1, 1, 1}, skew{2, 1, 1};
    EXPECT_NEAR(annotation_entropy(certain), 0.0, 1e-12);
    EXPECT_NEAR(annotation_entropy(even), std::log(4.0), 1e-12);
    EXPECT_NEAR(annotation_entropy(skew), -(0.5 * std::log(0.5) + 2 * 0.25 * std::log(0.25)), 1e-12);
    EXPECT_NEAR(normalized_entropy(even), 1.0, 1e-12);
    EXPECT_NEAR(entropy_bits(even), 2.0, 1e-12);
    const std::vector<int> zeros{0, 0};
    EXPECT_THROW(annotation_entropy(zeros), PreconditionError);
}

TEST(Entropy, MaximalOnlyWhenUniform) {
    std::mt19937 rng(5);
    for (int t = 0; t < 200; ++t) {
        std::vector<int> c(4);
        for (auto& x : c) x = static_cast<int>(rng() % 5);
        if (c[0] + c[1] + c[2] + c[3] == 0) continue;
        const double h = annotation_entropy(c);
        EXPECT_NEAR(h, oracle::entropy(c), 1e-12);
        const bool uniform = c[0] == c[1] && c[1] == c[2] && c[2] == c[3];
        EXPECT_EQ(std::abs(h - std::log(4.0)) < 1e-12, uniform);
        int nonzero = 0;
        for (int x : c) nonzero += x > 0;
        EXPECT_EQ(h == 0.0, nonzero == 1);
    }
}

TEST(Jaccard, Examples) {
    EXPECT_EQ(jaccard_distance({1, 2}, {1, 2}), 0.0);
    EXPECT_EQ(jaccard_distance({1}, {2}), 1.0);
    EXPECT_NEAR(jaccard_distance({1, 2}, {2, 3}), 2.0 / 3.0, 1e-15);
    EXPECT_EQ(jaccard_distance({}, {}), 0.0);
    EXPECT_EQ(jaccard_distance({}, {1}), 1.0);
}

TEST(Jaccard, MetricAxioms) {
    std::mt19937 rng(17);
    for (int t = 0; t < 10000; ++t) {
        const auto a = oracle::to_set(rng() & 0x3f), b = oracle::to_set(rng() & 0x3f), c = oracle::to_set(rng() & 0x3f);
        const double ab = jaccard_distance(a, b);
        ASSERT_EQ(ab, oracle::jaccard(a, b));
        ASSERT_EQ(jaccard_distance(a, a), 0.0);
        ASSERT_EQ(ab, jaccard_distance(b, a));
        ASSERT_EQ(ab == 0.0, a == b);
        ASSERT_LE(ab, jaccard_distance(a, c) + jaccard_distance(c, b) + 1e-15);
    }
}

TEST(Standardize, Examples) {
    EXPECT_EQ(standardize_prediction({7, 9}, {9}), (IndexSet{-2, 9}));
    EXPECT_EQ(standardize_prediction({9}, {9}), (IndexSet{9}));
    EXPECT_EQ(standardize_prediction({1, 2}, {9}), (IndexSet{-2}));
    EXPECT_EQ(standardize_prediction({}, {9}), IndexSet{});
}

TEST(Standardize, Idempotent) {
    std::mt19937 rng(23);
    for (int t = 0; t < 500; ++t) {
        const auto p = oracle::to_set(rng() & 0xff), r = oracle::to_set(rng() & 0xff);
        const auto once = standardize_prediction(p, r);
        EXPECT_EQ(standardize_prediction(once, r), once);
    }
}

TEST(Union, Examples) {
    std::vector<IndexSet> a{{1}, {2}}, b{{}, {}}, c{{1, 2}, {2, 3}, {3}};
    EXPECT_EQ(union_annotations(a), (IndexSet{1, 2}));
    EXPECT_EQ(union_annotations(b), IndexSet{});
    EXPECT_EQ(union_annotations(c), (IndexSet{1, 2, 3}));
    EXPECT_THROW(union_annotations({}), PreconditionError);
}

TEST(MeanStd, Population) {
    const std::vector<double> v{1, 2, 3, 4};
    const auto m = mean_std(v);
    EXPECT_DOUBLE_EQ(m.mean, 2.5);
    EXPECT_DOUBLE_EQ(m.std, std::sqrt(1.25));
    EXPECT_EQ(m.n, 4u);
}

namespace {

using Units = std::vector<std::vector<IndexSet>>;

double jd(const IndexSet& a, const IndexSet& b) {
    return jaccard_distance(a, b);
}

}  // namespace

TEST(Alpha, Unanimous) {
    const Units u{{{1}, {1}, {1}}, {{2, 3}, {2, 3}}, {{}, {}, {}}};
    EXPECT_EQ(krippendorff_alpha(u, jd), 1.0);
}

TEST(Alpha, SwappedSingletons) {
    // D_o = 1, D_e = (4 pairs at distance 1 out of 6) = 2/3
    const Units u{{{1}, {2}}, {{2}, {1}}};
    EXPECT_NEAR(krippendorff_alpha(u, jd), -0.5, 1e-12);
    EXPECT_NEAR(oracle::alpha_coincidence(u, jd), -0.5, 1e-12);
}

TEST(Alpha, MatchesCoincidenceOracle) {
    const std::vector<Units> fixtures{
        // five annotators per claim, one unit per masked evidence
        {{{0}, {0}, {0, 2}, {0}, {}},
         {{1, 2}, {2}, {2}, {1, 2}, {2}},
         {{3}, {3}, {3}, {-2}, {3}},
         {{}, {4}, {}, {}, {-2, 4}}},
        // uneven unit sizes and a unit with one label (ignored)
        {{{1}, {1, 2}}, {{2}, {2}, {3}}, {{5}}, {{1, 3}, {3}, {1, 3}, {1}}},
        // mostly disagreement
        {{{0}, {1}, {2}}, {{1}, {0}}, {{0, 1}, {2}}, {{2}, {0, 2}, {1}}},
    };
    for (const auto& u : fixtures) {
        EXPECT_NEAR(krippendorff_alpha(u, jd), oracle::alpha_coincidence(u, jd), 1e-9);
    }
}

TEST(Alpha, PerturbingAUnanimousLabelLowersAlpha) {
    Units u{{{1}, {1}, {1}}, {{2}, {2}, {2}}, {{3}, {3}, {3}}};
    const double base = krippendorff_alpha(u, jd);
    for (std::size_t i = 0; i < u.size(); ++i) {
        auto v = u;
        v[i][0] = {7};
        EXPECT_LT(krippendorff_alpha(v, jd), base);
    }
}

TEST(Alpha, Degenerate) {
    const Units one{{{1}, {2}}};
    EXPECT_THROW(krippendorff_alpha(one, jd), PreconditionError);
    const Units same{{{1}, {1}}, {{1}, {1}}};
    EXPECT_EQ(krippendorff_alpha(same, jd), 1.0);
}

TEST(Alpha, KeyedUnits) {
    std::map<std::string, std::vector<std::pair<std::string, IndexSet>>> units{
        {"t1", {{"a", {1}}, {"b", {2}}}}, {"t2", {{"a", {2}}, {"b", {1}}}}};
    EXPECT_NEAR(krippendorff_alpha(units, jd), -0.5, 1e-12);
}
