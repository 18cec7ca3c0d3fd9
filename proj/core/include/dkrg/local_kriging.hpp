#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dkrg/image.hpp"
#include "dkrg/kriging.hpp"

namespace dkrg {

/// Where the LR sample (i, j) sits on the HR grid.
enum class LatticeAlignment {
  kCenter,  // (s*i + (s-1)/2, s*j + (s-1)/2): the bicubic degradation's sample centers
  kCorner,  // (s*i, s*j)
};

struct LocalKrigingOptions {
  int window = 90;  // HR pixels
  int stride = 81;  // HR pixels
  LatticeAlignment alignment = LatticeAlignment::kCenter;
  int max_lag = 10;   // LR pixels, for the per-window covariance fit
  int min_sites = 4;  // below this the window falls back to bicubic
  SolveOptions solve;
};

struct WindowFit {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
  int sites = 0;
  double c0 = 0.0;
  double sigma = 0.0;  // HR pixels
  double condition = 0.0;
  double jitter = 0.0;
  bool fallback = false;
  std::string note;
};

/// HR-grid position of LR sample index `i` at the given scale.
double lattice_position(int i, int scale, LatticeAlignment alignment);

/// Offsets of overlapping windows covering [0, length).
std::vector<int> window_offsets(int length, int window, int stride);

/// Super-resolves `lr` by `scale` with ordinary kriging over overlapping
/// windows. Each window fits its own Gaussian covariance model on the LR
/// samples it contains and kriges every HR pixel from those samples;
/// overlapping estimates are averaged. HR pixels that coincide with a sample
/// site take the sample value.
///
/// Windows are solved concurrently (see parallel.hpp); the merge is in window
/// order so the output does not depend on the thread count.
Image local_krige_sr(const Image& lr, int scale,
                     const LocalKrigingOptions& options = {},
                     std::vector<WindowFit>* diagnostics = nullptr);

/// CSV rows `top,left,height,width,sites,c0,sigma,condition,jitter,fallback,note`.
void write_window_fits_csv(std::ostream& out, const std::vector<WindowFit>& fits);

}  // namespace dkrg
