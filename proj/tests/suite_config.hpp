#pragma once

// Small but complete suite configuration shared by tests.
namespace test_support {

inline constexpr const char* kSmallSuite = R"({
  "seed": 2024,
  "model": {"wavenumbers": [0.5, 1.0, 2.0], "weights": [0.25, 0.5, 0.25],
            "angular_order": 32, "solenoidal_fraction": 1.0},
  "cov_check": {"random_models": 1, "kappa_points": 50, "increment_samples": 500},
  "diffusivity": {"T": 1.0, "dt": 0.05, "replicas": 20},
  "lyapunov": {"T": 2.0, "dt": 0.05, "replicas": 4},
  "stable_norm": {"distances": [10, 11], "dt": 0.05, "replicas": 2, "pilot_replicas": 2},
  "shape": {"horizons": [2.0], "dt": 0.05, "replicas": 3},
  "persistence": {"horizons": [4.0], "dt": 0.05, "replicas": 3},
  "support": {"horizons": [2.0], "dt": 0.05, "replicas": 2, "net_cap": 300,
              "sample_points": 5}
})";

}  // namespace test_support
