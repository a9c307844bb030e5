#pragma once

#include <cstdint>

#include "cardioprop/stack.hpp"

namespace cardioprop {

/// Synthetic short-axis phantom. Lengths are in pixels unless marked _mm.
/// With `vary_anatomy` the radii, position and drift are jittered per seed
/// around the nominal values below.
struct PhantomConfig {
  int rows = 128;
  int cols = 128;
  int slices = 10;
  double spacing_mm = 1.8;
  double thickness_mm = 10.0;
  int above_base_slices = 1;  // slices above the base; the base index equals this

  double lvc_radius_base = 8.5;
  double lvc_radius_apex = 2.5;
  double wall_base = 4.0;
  double wall_apex = 3.0;
  double rv_radius_base = 14.0;
  double rv_apex_scale = 0.45;   // RV circle radius at the apex relative to the base
  double drift = 5.0;            // LV centre displacement base -> apex
  double jitter = 0.7;           // per-slice in-plane misalignment
  double noise = 0.05;           // Gaussian noise, relative to blood intensity
  double blur_sigma = 0.8;
  bool distractor = false;       // heart-like ring + core next to the apical slices
  bool vary_anatomy = true;
  std::uint64_t seed = 0;
};

struct PhantomCase {
  CardiacStack ed;
  CardiacStack es;
};

/// Throws Error("config") for infeasible geometry.
void validate(const PhantomConfig& config);

/// ED and ES stacks of one subject, raw (unadapted) masks, known base index.
PhantomCase generate_case(const PhantomConfig& config);

/// One phase of generate_case.
CardiacStack generate(const PhantomConfig& config, Phase phase = Phase::ED);

}  // namespace cardioprop
