#include "xeno/fixtures.hpp"

namespace xeno::fixtures {

namespace {

TrajectoryModel two_token_root(double p_a, double p_b)
{
    const auto alphabet = ab_alphabet();
    const TokenString root;
    const Symbol a = alphabet.symbol("a");
    const Symbol b = alphabet.symbol("b");
    BranchMap branches;
    NextTokenDistribution top;
    if (p_a > 0.0 || p_b == 0.0) top.push_back({a, p_a});
    top.push_back({b, p_b});
    branches.emplace(root, std::move(top));
    if (p_a > 0.0) branches.emplace(root.extended(a), NextTokenDistribution{{Symbol::eos, 1.0}});
    if (p_b > 0.0) branches.emplace(root.extended(b), NextTokenDistribution{{Symbol::eos, 1.0}});
    return TrajectoryModel::from_branches(alphabet, 2, std::move(branches));
}

} // namespace

Alphabet ab_alphabet()
{
    return Alphabet({"a", "b"});
}

TrajectoryModel m1()
{
    return two_token_root(0.5, 0.5);
}

TrajectoryModel m2()
{
    return two_token_root(0.25, 0.75);
}

TrajectoryModel m3()
{
    return two_token_root(0.0, 1.0);
}

System s1()
{
    return System({Structure::token_indicator("alpha_a", ab_alphabet(), "a")});
}

System s2()
{
    const auto alphabet = ab_alphabet();
    return System({Structure::token_indicator("alpha_a", alphabet, "a"),
                   Structure::token_indicator("alpha_b", alphabet, "b")});
}

TrajectoryModel two_leaf(double mu)
{
    return two_token_root(mu, 1.0 - mu);
}

} // namespace xeno::fixtures
