#pragma once

#include "doseband/density.hpp"
#include "doseband/synthetic.hpp"

namespace doseband::testing {

// Small network that trains in well under a second.
inline DensityModelConfig tiny_config(std::uint64_t seed = 7) {
  DensityModelConfig c;
  c.hidden_units = 16;
  c.depth = 2;
  c.n_components = 4;
  c.epochs = 15;
  c.batch_size = 32;
  c.learning_rate = 3e-3;
  c.optimizer = Optimizer::kAdam;
  c.seed = seed;
  return c;
}

inline const Dataset& synthetic_data() {
  static const Dataset data = [] {
    SyntheticConfig s;
    s.n = 600;
    s.seed = 99;
    return generate(s);
  }();
  return data;
}

inline const ConditionalDensityModel& synthetic_model() {
  static const ConditionalDensityModel model = train(synthetic_data(), tiny_config());
  return model;
}

}  // namespace doseband::testing
