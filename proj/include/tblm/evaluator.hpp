#pragma once

#include <cstddef>
#include <limits>

#include "tblm/codec.hpp"

namespace tblm {

/// Training objective seen by the local search. Moves are single bit flips
/// of the owned genome.
class Evaluator {
public:
    virtual ~Evaluator() = default;

    virtual const BitGenome& genome() const = 0;
    /// Replaces the genome and recomputes all state from scratch.
    virtual void reset(const BitGenome& genome) = 0;

    /// Current training objective (base loss plus regularization).
    virtual double objective() const = 0;
    /// Objective change the flip of `bit` would cause; no state is modified.
    /// When the change is known to be >= `reject_at` the evaluator may stop
    /// early and return any value >= `reject_at`.
    virtual double probe(std::size_t bit, double reject_at = std::numeric_limits<double>::infinity()) = 0;
    virtual void commit(std::size_t bit) = 0;

    /// Loss on held-out data for the current genome.
    virtual double validation_loss() = 0;
};

}  // namespace tblm
