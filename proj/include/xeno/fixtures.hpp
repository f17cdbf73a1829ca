#pragma once

#include "xeno/structures.hpp"
#include "xeno/trajectory_model.hpp"

namespace xeno::fixtures {

/// Alphabet {a, b}.
Alphabet ab_alphabet();

/// ⊥ -> {a: 0.5, b: 0.5}, each token then ends.
TrajectoryModel m1();
/// ⊥ -> {a: 0.25, b: 0.75}, each token then ends.
TrajectoryModel m2();
/// ⊥ -> {b: 1}: the collapsed, deterministic model.
TrajectoryModel m3();

/// (α_a)
System s1();
/// (α_a, α_b)
System s2();

/// Two-leaf model ⊥ -> {a: mu, b: 1 - mu}.
TrajectoryModel two_leaf(double mu);

} // namespace xeno::fixtures
