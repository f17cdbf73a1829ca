#include "support.hpp"

#include "xeno/error.hpp"
#include "xeno/fixtures.hpp"
#include "xeno/oracle.hpp"
#include "xeno/random.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace xeno;
using xeno::test::str;
namespace oracle = xeno::oracle;

namespace {

nlohmann::json m2_document()
{
    return nlohmann::json::parse(R"({
        "tokens": ["a", "b"],
        "max_len": 2,
        "branches": {"": {"a": 0.25, "b": 0.75}, "a": {"<eos>": 1.0}, "b": {"<eos>": 1.0}}
    })");
}

const NextTokenDistribution& root_branch(const TrajectoryModel& m)
{
    return *m.find_branch(TokenString{});
}

double branch_p(const NextTokenDistribution& dist, Symbol s)
{
    for (const auto& o : dist) {
        if (o.symbol == s) return o.probability;
    }
    return 0.0;
}

} // namespace

TEST_CASE("alphabet rejects markers, duplicates and empty sets")
{
    CHECK_THROWS_AS(Alphabet({}), ValidationError);
    CHECK_THROWS_AS(Alphabet({"a", "a"}), ValidationError);
    CHECK_THROWS_AS(Alphabet({"<eos>"}), ValidationError);
    CHECK_THROWS_AS(Alphabet({"a b"}), ValidationError);
    const Alphabet ab({"a", "b"});
    CHECK(ab.name(Symbol::eos) == "<eos>");
    CHECK(ab.symbol("b") == token_symbol(1));
    CHECK_FALSE(ab.find("c").has_value());
}

TEST_CASE("token strings keep markers in place")
{
    const auto ab = fixtures::ab_alphabet();
    const auto s = parse_string(ab, "a b <eos>");
    CHECK(s.terminal());
    CHECK(s.content_length() == 2);
    CHECK(format_string(ab, s) == "<bos> a b <eos>");
    CHECK(detokenize(ab, s) == "a b");
    CHECK(parse_string(ab, "<bos> a b <eos>") == s);
    CHECK(parse_string(ab, "") == TokenString{});
    CHECK_THROWS_AS(parse_string(ab, "a <eos> b"), ValidationError);
    CHECK_THROWS_AS(parse_string(ab, "a <bos>"), ValidationError);
    CHECK_THROWS_AS(s.extended(Symbol::eos), ValidationError);
    CHECK(s.prefix(2).is_prefix_of(s));
    CHECK_FALSE(s.is_prefix_of(s.prefix(2)));
}

TEST_CASE("load_model reads the M2 document")
{
    const auto m = load_model(m2_document());
    const auto ys = enumerate_trajectories(m, TokenString{});
    REQUIRE(ys.size() == 2);
    CHECK(ys[0].string == str(m, "a <eos>"));
    CHECK(ys[0].probability == 0.25);
    CHECK(ys[1].string == str(m, "b <eos>"));
    CHECK(ys[1].probability == 0.75);
}

TEST_CASE("load_model rejects invalid documents")
{
    SUBCASE("branch not summing to one")
    {
        auto doc = m2_document();
        doc["branches"][""] = {{"a", 0.5}, {"b", 0.4}};
        CHECK_THROWS_AS(load_model(doc), ValidationError);
    }
    SUBCASE("cycle without eos before max_len")
    {
        const auto doc = nlohmann::json::parse(R"({
            "tokens": ["a"], "max_len": 3,
            "branches": {"": {"a": 1}, "a": {"a": 1}, "a a": {"a": 1}, "a a a": {"a": 1}}
        })");
        CHECK_THROWS_AS(load_model(doc), ValidationError);
    }
    SUBCASE("reachable prefix without a branch")
    {
        auto doc = m2_document();
        doc["branches"].erase("b");
        CHECK_THROWS_AS(load_model(doc), ValidationError);
    }
    SUBCASE("unknown token")
    {
        auto doc = m2_document();
        doc["branches"]["a"] = {{"c", 1.0}};
        CHECK_THROWS_AS(load_model(doc), ValidationError);
    }
    SUBCASE("malformed shapes")
    {
        CHECK_THROWS_AS(load_model(nlohmann::json::array()), ConfigError);
        auto doc = m2_document();
        doc["branches"]["a"] = "eos";
        CHECK_THROWS_AS(load_model(doc), ConfigError);
        doc = m2_document();
        doc.erase("max_len");
        CHECK_THROWS_AS(load_model(doc), ConfigError);
    }
    SUBCASE("negative probability")
    {
        auto doc = m2_document();
        doc["branches"][""] = {{"a", -0.25}, {"b", 1.25}};
        CHECK_THROWS_AS(load_model(doc), ValidationError);
    }
}

TEST_CASE("model documents round-trip")
{
    const auto m = fixtures::m2();
    const auto again = load_model(model_to_json(m));
    CHECK(again.branches().size() == m.branches().size());
    for (const auto& [prefix, dist] : m.branches()) {
        const auto* other = again.find_branch(prefix);
        REQUIRE(other != nullptr);
        REQUIRE(other->size() == dist.size());
        for (std::size_t i = 0; i < dist.size(); ++i) {
            CHECK((*other)[i].symbol == dist[i].symbol);
            CHECK((*other)[i].probability == dist[i].probability);
        }
    }
}

TEST_CASE("trajectory_probability on M2")
{
    const auto m = fixtures::m2();
    CHECK(trajectory_probability(m, TokenString{}, str(m, "b <eos>")) == 0.75);
    CHECK(trajectory_probability(m, str(m, "b"), str(m, "b <eos>")) == 1.0);

    // Decomposition through ⊥a, checked against the branch-product oracle.
    const auto y = str(m, "a <eos>");
    const double whole = trajectory_probability(m, TokenString{}, y);
    const double split = branch_p(root_branch(m), m.alphabet().symbol("a")) * trajectory_probability(m, str(m, "a"), y);
    const auto exact = oracle::brute_force_distribution(m, TokenString{});
    CHECK(whole == doctest::Approx(oracle::to_double(exact[0].probability)).epsilon(1e-15));
    CHECK(split == doctest::Approx(whole).epsilon(1e-15));

    CHECK_THROWS_AS(trajectory_probability(m, TokenString{}, str(m, "a")), DomainError);
    CHECK_THROWS_AS(trajectory_probability(m, str(m, "b"), str(m, "a <eos>")), DomainError);
}

TEST_CASE("chain rule holds for every intermediate prefix on random trees")
{
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto m = oracle::random_tree_model(seed);
        for (const auto& t : oracle::brute_force_distribution(m, TokenString{})) {
            const double whole = trajectory_log_probability(m, TokenString{}, t.string);
            CHECK(std::exp(whole) == doctest::Approx(oracle::to_double(t.probability)).epsilon(1e-12));
            for (std::size_t k = 1; k < t.string.size(); ++k) {
                const auto mid = t.string.prefix(k);
                const double head = k == 1 ? 0.0 : [&] {
                    double lp = 0.0;
                    for (std::size_t j = 1; j < k; ++j) {
                        lp += std::log(branch_p(*m.find_branch(t.string.prefix(j)), t.string.symbols()[j]));
                    }
                    return lp;
                }();
                const double tail = trajectory_log_probability(m, mid, t.string);
                CHECK(std::abs(head + tail - whole) <= 1e-12);
            }
        }
    }
}

TEST_CASE("enumeration is exhaustive and normalized")
{
    const auto m3 = fixtures::m3();
    const auto ys = enumerate_trajectories(m3, TokenString{});
    REQUIRE(ys.size() == 1);
    CHECK(ys[0].string == str(m3, "b <eos>"));
    CHECK(ys[0].probability == 1.0);

    for (const auto& m : {fixtures::m1(), fixtures::m2(), fixtures::m3()}) {
        double total = 0.0;
        for (const auto& y : enumerate_trajectories(m, TokenString{})) total += y.probability;
        CHECK(std::abs(total - 1.0) <= 1e-9);
    }
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto m = oracle::random_tree_model(seed);
        const auto ys = enumerate_trajectories(m, TokenString{});
        const auto exact = oracle::brute_force_distribution(m, TokenString{});
        REQUIRE(ys.size() == exact.size());
        double total = 0.0;
        for (std::size_t i = 0; i < ys.size(); ++i) {
            CHECK(ys[i].string == exact[i].string);
            total += ys[i].probability;
        }
        CHECK(std::abs(total - 1.0) <= 1e-9);
    }

    CHECK_THROWS_AS(enumerate_trajectories(fixtures::m2(), str(fixtures::m2(), "a <eos>")), DomainError);
    CHECK_THROWS_AS(enumerate_trajectories(fixtures::m3(), str(fixtures::m3(), "a")), DomainError);
}

TEST_CASE("sampling is deterministic and partition independent")
{
    const auto m3 = fixtures::m3();
    for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) CHECK(sample_trajectory(m3, TokenString{}, seed) == str(m3, "b <eos>"));

    const auto m = oracle::random_tree_model(7);
    CHECK(sample_trajectory(m, TokenString{}, 42) == sample_trajectory(m, TokenString{}, 42));
    const auto batch = sample_trajectories(m, TokenString{}, 42, 64);
    const auto head = sample_trajectories(m, TokenString{}, 42, 16);
    for (std::size_t i = 0; i < head.size(); ++i) CHECK(head[i] == batch[i]);
    CHECK(batch[0] == sample_trajectory(m, TokenString{}, 42));
}

TEST_CASE("sampled frequencies match the enumeration oracle")
{
    constexpr std::size_t kDraws = 100000;
    const auto m2 = fixtures::m2();
    const auto draws = sample_trajectories(m2, TokenString{}, 2024, kDraws);
    std::size_t hits = 0;
    for (const auto& y : draws) hits += y == str(m2, "a <eos>") ? 1 : 0;
    const double p_a = oracle::to_double(oracle::brute_force_distribution(m2, TokenString{})[0].probability);
    CHECK(xeno::test::within_sigma(hits, kDraws, p_a));
    CHECK(xeno::test::chi_square_accepts({p_a, 1.0 - p_a}, {hits, kDraws - hits}, kDraws));

    // A deeper tree with many leaves.
    const auto m = oracle::random_tree_model(11, 3, 3);
    const auto exact = oracle::brute_force_distribution(m, TokenString{});
    std::map<TokenString, std::size_t> index;
    std::vector<double> p;
    for (const auto& t : exact) {
        index.emplace(t.string, p.size());
        p.push_back(oracle::to_double(t.probability));
    }
    std::vector<std::size_t> counts(p.size(), 0);
    for (const auto& y : sample_trajectories(m, TokenString{}, 77, kDraws)) ++counts[index.at(y)];
    CHECK(xeno::test::chi_square_accepts(p, counts, kDraws));
}

TEST_CASE("callback models sample but do not enumerate")
{
    const auto ab = fixtures::ab_alphabet();
    const auto m = TrajectoryModel::from_callback(ab, 3, [&](const TokenString& x) {
        if (x.content_length() >= 2) return NextTokenDistribution{{Symbol::eos, 1.0}};
        return NextTokenDistribution{{Symbol::eos, 0.5}, {ab.symbol("a"), 0.5}};
    });
    CHECK_FALSE(m.enumerable());
    CHECK_THROWS_AS(m.branches(), NonEnumerableError);
    CHECK_THROWS_AS(enumerate_trajectories(m, TokenString{}), NonEnumerableError);
    const auto y = sample_trajectory(m, TokenString{}, 5);
    CHECK(y.terminal());
    CHECK(y.content_length() <= 2);
    CHECK(y == sample_trajectory(m, TokenString{}, 5));

    const auto bad = TrajectoryModel::from_callback(ab, 2, [&](const TokenString&) {
        return NextTokenDistribution{{ab.symbol("a"), 0.7}};
    });
    CHECK_THROWS_AS(sample_trajectory(bad, TokenString{}, 1), ValidationError);
}

TEST_CASE("temperature reshapes branches")
{
    const auto m2 = fixtures::m2();
    const auto hot = apply_intervention(m2, {"t", {Temperature{0.5}}});
    const auto& root = root_branch(hot);
    // (1/4)^2 and (3/4)^2 renormalized, in exact arithmetic.
    const oracle::Rational pa = oracle::to_rational(0.25) * oracle::to_rational(0.25);
    const oracle::Rational pb = oracle::to_rational(0.75) * oracle::to_rational(0.75);
    CHECK(branch_p(root, token_symbol(0)) == doctest::Approx(oracle::to_double(pa / (pa + pb))).epsilon(1e-15));
    CHECK(branch_p(root, token_symbol(1)) == doctest::Approx(oracle::to_double(pb / (pa + pb))).epsilon(1e-15));
    CHECK(branch_p(root, token_symbol(0)) == doctest::Approx(0.1).epsilon(1e-15));

    CHECK_THROWS_AS(apply_intervention(m2, {"t", {Temperature{0.0}}}), ValidationError);
    CHECK_THROWS_AS(apply_intervention(m2, {"t", {Temperature{-1.0}}}), ValidationError);
}

TEST_CASE("identity, unit temperature and empty bias are no-ops")
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto m = oracle::random_tree_model(seed);
        for (const auto& w : {Intervention{"id", {}}, Intervention{"t1", {Temperature{1.0}}},
                              Intervention{"b0", {TokenBias{}}}}) {
            const auto out = apply_intervention(m, w);
            REQUIRE(out.branches().size() == m.branches().size());
            for (const auto& [prefix, dist] : m.branches()) {
                const auto& other = *out.find_branch(prefix);
                REQUIRE(other.size() == dist.size());
                for (std::size_t i = 0; i < dist.size(); ++i)
                    CHECK(std::abs(other[i].probability - dist[i].probability) <= 1e-12);
            }
        }
    }
}

TEST_CASE("token bias adds log-probability and renormalizes")
{
    const auto m2 = fixtures::m2();
    const auto biased = apply_intervention(m2, {"bias", {TokenBias{{{"a", std::log(3.0)}}}}});
    CHECK(branch_p(root_branch(biased), token_symbol(0)) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_THROWS_AS(apply_intervention(m2, {"bias", {TokenBias{{{"zz", 1.0}}}}}), ValidationError);

    // Zero-probability entries stay at zero.
    const auto m3 = fixtures::m3();
    const auto pushed = apply_intervention(m3, {"bias", {TokenBias{{{"a", 5.0}}}}});
    CHECK(branch_p(root_branch(pushed), token_symbol(0)) == 0.0);
}

TEST_CASE("prepend prompt conditions on a hidden prefix")
{
    const auto m2 = fixtures::m2();
    const auto w = apply_intervention(m2, {"p", {PrependPrompt{{"b"}}}});
    const auto& root = root_branch(w);
    const auto& original = *m2.find_branch(str(m2, "b"));
    REQUIRE(root.size() == original.size());
    CHECK(root[0].symbol == original[0].symbol);
    CHECK(root[0].probability == original[0].probability);

    CHECK_THROWS_AS(apply_intervention(fixtures::m3(), {"p", {PrependPrompt{{"a"}}}}), ValidationError);
    CHECK_THROWS_AS(apply_intervention(m2, {"p", {PrependPrompt{{"a", "<eos>"}}}}), ValidationError);
}

TEST_CASE("transforms compose in document order")
{
    const auto m2 = fixtures::m2();
    const Intervention ab{"ab", {Temperature{0.5}, TokenBias{{{"a", 1.0}}}}};
    const Intervention ba{"ba", {TokenBias{{{"a", 1.0}}}, Temperature{0.5}}};
    const double p_ab = branch_p(root_branch(apply_intervention(m2, ab)), token_symbol(0));
    const double p_ba = branch_p(root_branch(apply_intervention(m2, ba)), token_symbol(0));
    // Temperature then bias: 0.1 e / (0.1 e + 0.9); bias then temperature: e^2 / (e^2 + 9).
    CHECK(p_ab == doctest::Approx(0.1 * std::exp(1.0) / (0.1 * std::exp(1.0) + 0.9)));
    CHECK(p_ba == doctest::Approx(std::exp(2.0) / (std::exp(2.0) + 9.0)));
    CHECK(describe(ab) == "temperature(0.5);token_bias(a:1)");
}

TEST_CASE("reward tilt materializes the exact tilted model")
{
    const auto m2 = fixtures::m2();
    const auto a_end = str(m2, "a <eos>");
    const RewardTilt t{"r", TokenString{}, [&](const TokenString& y) { return y == a_end ? 1.0 : 0.0; }, std::log(3.0)};
    const auto tilted = apply_intervention(m2, {"tilt", {t}});
    CHECK(branch_p(root_branch(tilted), token_symbol(0)) == doctest::Approx(0.5).epsilon(1e-12));

    const auto cb = TrajectoryModel::from_callback(m2.alphabet(), 2, [&](const TokenString& x) { return m2.next(x); });
    CHECK_THROWS_AS(apply_intervention(cb, {"tilt", {t}}), NonEnumerableError);
    auto negative = t;
    negative.beta = -1.0;
    CHECK_THROWS_AS(apply_intervention(m2, {"tilt", {negative}}), ValidationError);
}

TEST_CASE("interventions always yield valid models on random trees")
{
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto m = oracle::random_tree_model(seed);
        Rng rng(seed);
        const Intervention w{"mix",
                             {Temperature{0.25 + 2.0 * rng.uniform()},
                              TokenBias{{{"a", rng.uniform() * 4.0 - 2.0}, {"<eos>", rng.uniform()}}},
                              RewardTilt{"len", TokenString{},
                                         [](const TokenString& y) { return static_cast<double>(y.content_length()); },
                                         rng.uniform() * 3.0}}};
        const auto out = apply_intervention(m, w);
        double total = 0.0;
        for (const auto& y : enumerate_trajectories(out, TokenString{})) total += y.probability;
        CHECK(std::abs(total - 1.0) <= 1e-9);
        CHECK_NOTHROW(load_model(model_to_json(out)));
    }
}
