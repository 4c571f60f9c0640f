#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "syncmapv2/errors.hpp"
#include "syncmapv2/image.hpp"

namespace syncmap {

enum class CorruptionKind { gaussian_noise, zoom_blur, snow, contrast, identity };

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::identity;
    int severity = 1;  // 1..5
    std::uint64_t seed = 0;
};

// Test hooks for the randomized transforms: force parameters or inject the
// noise realization so exact conformance is assertable.
struct CorruptionHooks {
    std::optional<double> forced_sigma;           // gaussian noise scale
    std::optional<double> forced_snow_scale;      // snow field scale (0 kills the layer)
    std::optional<double> forced_snow_angle_deg;  // motion-blur direction
    bool disable_snow_brightness = false;         // skip the brightness lift
    const std::vector<double>* injected_field = nullptr;  // h*w (snow) or h*w*3 (gaussian)
};

// Applies one corruption; deterministic given (input, spec, hooks).
ImageTensor corrupt(const ImageTensor& img, const CorruptionSpec& spec,
                    const CorruptionHooks& hooks = {});

CorruptionKind corruption_kind_from_string(const std::string& name);
std::string to_string(CorruptionKind kind);

// Per-severity constants, exposed so tests can cross-check the shipped table.
double gaussian_sigma(int severity);
double contrast_factor(int severity);
const std::vector<double>& zoom_factors(int severity);

struct SnowParams {
    double loc, scale, zoom, threshold, blur_radius, blur_sigma, blend;
};
const SnowParams& snow_params(int severity);

// Bilinear zoom with corner-aligned sampling (output size rounds half to
// even); exposed for the resampling unit tests.
std::vector<double> align_corners_zoom(const std::vector<double>& plane, int h, int w,
                                       int channels, double zoom_factor,
                                       int& out_h, int& out_w);

// Center-crop by ceil(dim/zoom), zoom back up, center-trim to the original
// dims; exposed for the resampling unit tests.
std::vector<double> clipped_zoom(const std::vector<double>& plane, int h, int w,
                                 int channels, double zoom_factor);

}  // namespace syncmap
