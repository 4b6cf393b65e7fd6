#ifndef ICAFUSION_METRICS_HPP
#define ICAFUSION_METRICS_HPP

#include <vector>

#include "icafusion/data.hpp"

// Fusion-quality metrics, computed on 8-bit rasters (never on normalized
// data). The exact formula each function implements is documented in
// docs/METRICS.md; implementations of these metrics vary across the
// literature, so the definitions here are pinned and oracle-tested.

namespace icafusion::metrics {

struct MetricReport {
    double ag = 0, en = 0, sd = 0, mi = 0, sf = 0, ncie = 0, qabf = 0, vif = 0;
};

/// Average gradient: mean over interior pixels of the forward-difference
/// magnitude; `scaled` divides by sqrt(2) (the common convention).
double ag(const Raster8& f, bool scaled = true);

/// Shannon entropy (bits) of the 256-bin intensity histogram.
double en(const Raster8& f);

/// Population standard deviation of pixel values.
double sd(const Raster8& f);

/// MI(F,A) + MI(F,B), mutual information in bits over 256-bin joint
/// histograms.
double mi(const Raster8& f, const Raster8& a, const Raster8& b);

/// Spatial frequency: sqrt(RF^2 + CF^2) with RF/CF the RMS of horizontal /
/// vertical first differences.
double sf(const Raster8& f);

/// Nonlinear correlation information entropy: eigenvalue entropy (base 256)
/// of the 3x3 matrix of pairwise nonlinear correlation coefficients.
double ncie(const Raster8& f, const Raster8& a, const Raster8& b);

/// Edge-preservation metric (Sobel strength/orientation, sigmoid
/// preservation models). `normalized` rescales by the exact-preservation
/// score so that qabf(A,A,A) == 1; the raw sigmoid product is kept
/// selectable for cross-implementation comparison.
double qabf(const Raster8& f, const Raster8& a, const Raster8& b, bool normalized = true);

/// Multi-scale pixel-domain visual information fidelity for fusion: four
/// dyadic scales, Gaussian windows, per-pixel variance-based information
/// ratios summed over both sources and averaged across scales.
double vif(const Raster8& f, const Raster8& a, const Raster8& b);

/// All eight metrics for one fused image against its sources.
MetricReport evaluate(const Raster8& f, const Raster8& a, const Raster8& b);

/// Arithmetic mean of per-image reports; throws std::domain_error on empty.
MetricReport mean_report(const std::vector<MetricReport>& reports);

}  // namespace icafusion::metrics

#endif
