#pragma once

#include "fmarket/circuit.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace harness {

using namespace fmarket;

/// Random strict NAND/PURIFY instance. Reads and writes balance only when n is a multiple of 3.
inline PureCircuitInstance random_strict(std::mt19937_64& rng, std::size_t n) {
  for (;;) {
    PureCircuitInstance inst{n, {}};
    std::vector<std::size_t> readers(n), outs(n);
    for (std::size_t i = 0; i < n; ++i) readers[i] = outs[i] = i;
    std::shuffle(readers.begin(), readers.end(), rng);
    std::shuffle(outs.begin(), outs.end(), rng);
    // NAND consumes 2 inputs and writes 1, PURIFY consumes 1 and writes 2
    std::size_t ri = 0, oi = 0;
    while (ri < n && oi < n) {
      bool nand = std::bernoulli_distribution(0.5)(rng);
      if (nand && ri + 2 <= n && oi + 1 <= n) {
        inst.gates.push_back(nand_gate(readers[ri], readers[ri + 1], outs[oi]));
        ri += 2;
        oi += 1;
      } else if (!nand && ri + 1 <= n && oi + 2 <= n) {
        inst.gates.push_back(purify_gate(readers[ri], outs[oi], outs[oi + 1]));
        ri += 1;
        oi += 2;
      } else {
        break;
      }
    }
    if (ri == n && oi == n && validate_structure(inst, true).ok) return inst;
  }
}

}  // namespace harness
