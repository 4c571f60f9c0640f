#include "syncmapv2/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace syncmap {

namespace {

// Severity tables transcribed from the imagecorruptions reference package;
// data/corruption_constants.json mirrors them and a unit test keeps the two
// in sync. Zoom factor sequences are the exact float64 values the reference
// produces (its arange endpoints suffer representation error, so severity 1
// really does include 1.11).
constexpr double kGaussianSigma[5] = {0.08, 0.12, 0.18, 0.26, 0.38};
constexpr double kContrastFactor[5] = {0.4, 0.3, 0.2, 0.1, 0.05};

const std::vector<double> kZoomFactors[5] = {
    {0x1.0000000000000p+0, 0x1.028f5c28f5c29p+0, 0x1.051eb851eb852p+0,
     0x1.07ae147ae147bp+0, 0x1.0a3d70a3d70a4p+0, 0x1.0cccccccccccdp+0,
     0x1.0f5c28f5c28f6p+0, 0x1.11eb851eb851fp+0, 0x1.147ae147ae148p+0,
     0x1.170a3d70a3d71p+0, 0x1.199999999999ap+0, 0x1.1c28f5c28f5c3p+0},
    {0x1.0000000000000p+0, 0x1.028f5c28f5c29p+0, 0x1.051eb851eb852p+0,
     0x1.07ae147ae147bp+0, 0x1.0a3d70a3d70a4p+0, 0x1.0cccccccccccdp+0,
     0x1.0f5c28f5c28f6p+0, 0x1.11eb851eb851fp+0, 0x1.147ae147ae148p+0,
     0x1.170a3d70a3d71p+0, 0x1.199999999999ap+0, 0x1.1c28f5c28f5c3p+0,
     0x1.1eb851eb851ecp+0, 0x1.2147ae147ae15p+0, 0x1.23d70a3d70a3ep+0,
     0x1.2666666666667p+0},
    {0x1.0000000000000p+0, 0x1.051eb851eb852p+0, 0x1.0a3d70a3d70a4p+0,
     0x1.0f5c28f5c28f6p+0, 0x1.147ae147ae148p+0, 0x1.199999999999ap+0,
     0x1.1eb851eb851ecp+0, 0x1.23d70a3d70a3ep+0, 0x1.28f5c28f5c290p+0,
     0x1.2e147ae147ae2p+0, 0x1.3333333333334p+0},
    {0x1.0000000000000p+0, 0x1.051eb851eb852p+0, 0x1.0a3d70a3d70a4p+0,
     0x1.0f5c28f5c28f6p+0, 0x1.147ae147ae148p+0, 0x1.199999999999ap+0,
     0x1.1eb851eb851ecp+0, 0x1.23d70a3d70a3ep+0, 0x1.28f5c28f5c290p+0,
     0x1.2e147ae147ae2p+0, 0x1.3333333333334p+0, 0x1.3851eb851eb86p+0,
     0x1.3d70a3d70a3d8p+0},
    {0x1.0000000000000p+0, 0x1.07ae147ae147bp+0, 0x1.0f5c28f5c28f6p+0,
     0x1.170a3d70a3d71p+0, 0x1.1eb851eb851ecp+0, 0x1.2666666666667p+0,
     0x1.2e147ae147ae2p+0, 0x1.35c28f5c28f5dp+0, 0x1.3d70a3d70a3d8p+0,
     0x1.451eb851eb853p+0, 0x1.4cccccccccccep+0},
};

// (loc, scale, zoom, threshold, blur radius, blur sigma, blend)
constexpr SnowParams kSnowParams[5] = {
    {0.1, 0.3, 3.0, 0.5, 10.0, 4.0, 0.8},
    {0.2, 0.3, 2.0, 0.5, 12.0, 4.0, 0.7},
    {0.55, 0.3, 4.0, 0.9, 12.0, 8.0, 0.7},
    {0.55, 0.3, 4.5, 0.85, 12.0, 8.0, 0.65},
    {0.55, 0.3, 2.5, 0.85, 12.0, 12.0, 0.55},
};

int severity_index(int severity) {
    if (severity < 1 || severity > 5) throw ArgumentError("severity must lie in 1..5");
    return severity - 1;
}

}  // namespace

double gaussian_sigma(int severity) { return kGaussianSigma[severity_index(severity)]; }
double contrast_factor(int severity) { return kContrastFactor[severity_index(severity)]; }
const std::vector<double>& zoom_factors(int severity) { return kZoomFactors[severity_index(severity)]; }
const SnowParams& snow_params(int severity) { return kSnowParams[severity_index(severity)]; }

std::vector<double> align_corners_zoom(const std::vector<double>& plane, int h, int w,
                                       int channels, double zoom_factor,
                                       int& out_h, int& out_w) {
    if (h < 1 || w < 1 || channels < 1) throw ArgumentError("bad plane dims");
    if (plane.size() != static_cast<std::size_t>(h) * w * channels)
        throw ArgumentError("plane size does not match dims");
    // output dims round half to even, matching the reference resampler
    out_h = static_cast<int>(std::nearbyint(h * zoom_factor));
    out_w = static_cast<int>(std::nearbyint(w * zoom_factor));
    if (out_h < 1 || out_w < 1) throw ArgumentError("zoom factor collapses the plane");

    std::vector<double> out(static_cast<std::size_t>(out_h) * out_w * channels);
    const double sy = out_h > 1 ? static_cast<double>(h - 1) / (out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(w - 1) / (out_w - 1) : 0.0;
    auto src = [&](int r, int c, int ch) {
        return plane[(static_cast<std::size_t>(r) * w + c) * channels + ch];
    };
    for (int r = 0; r < out_h; ++r) {
        const double fy = r * sy;
        const int y0 = std::min(static_cast<int>(fy), h - 1);
        const int y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int c = 0; c < out_w; ++c) {
            const double fx = c * sx;
            const int x0 = std::min(static_cast<int>(fx), w - 1);
            const int x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            for (int ch = 0; ch < channels; ++ch) {
                const double top = src(y0, x0, ch) * (1.0 - wx) + src(y0, x1, ch) * wx;
                const double bot = src(y1, x0, ch) * (1.0 - wx) + src(y1, x1, ch) * wx;
                out[(static_cast<std::size_t>(r) * out_w + c) * channels + ch] =
                    top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

std::vector<double> clipped_zoom(const std::vector<double>& plane, int h, int w,
                                 int channels, double zoom_factor) {
    const int ch_crop = static_cast<int>(std::ceil(h / zoom_factor));
    const int cw_crop = static_cast<int>(std::ceil(w / zoom_factor));
    const int top = (h - ch_crop) / 2;
    const int left = (w - cw_crop) / 2;
    std::vector<double> crop(static_cast<std::size_t>(ch_crop) * cw_crop * channels);
    for (int r = 0; r < ch_crop; ++r)
        for (int c = 0; c < cw_crop; ++c)
            for (int k = 0; k < channels; ++k)
                crop[(static_cast<std::size_t>(r) * cw_crop + c) * channels + k] =
                    plane[(static_cast<std::size_t>(top + r) * w + (left + c)) * channels + k];
    int zh = 0, zw = 0;
    std::vector<double> zoomed = align_corners_zoom(crop, ch_crop, cw_crop, channels,
                                                    zoom_factor, zh, zw);
    const int trim_top = (zh - h) / 2;
    const int trim_left = (zw - w) / 2;
    if (trim_top < 0 || trim_left < 0)
        throw NumericError("clipped zoom produced an undersized plane", zoom_factor);
    std::vector<double> out(static_cast<std::size_t>(h) * w * channels);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int k = 0; k < channels; ++k)
                out[(static_cast<std::size_t>(r) * w + c) * channels + k] =
                    zoomed[(static_cast<std::size_t>(trim_top + r) * zw + (trim_left + c)) * channels + k];
    return out;
}

namespace {

ImageTensor apply_gaussian(const ImageTensor& img, const CorruptionSpec& spec,
                           const CorruptionHooks& hooks) {
    const double sigma = hooks.forced_sigma.value_or(gaussian_sigma(spec.severity));
    const std::size_t total = img.data.size();
    std::vector<double> field;
    if (hooks.injected_field) {
        if (hooks.injected_field->size() != total)
            throw ArgumentError("injected field size mismatch");
        field = *hooks.injected_field;
    } else {
        field.resize(total);
        std::mt19937_64 rng(spec.seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& v : field) v = normal(rng);
    }
    ImageTensor out = img;
    for (std::size_t i = 0; i < total; ++i)
        out.data[i] = static_cast<float>(
            std::clamp(static_cast<double>(img.data[i]) + sigma * field[i], 0.0, 1.0));
    return out;
}

ImageTensor apply_contrast(const ImageTensor& img, const CorruptionSpec& spec) {
    const double c = contrast_factor(spec.severity);
    // per-channel means, as the reference computes them
    double mean[3] = {0.0, 0.0, 0.0};
    const std::size_t pixels = static_cast<std::size_t>(img.height) * img.width;
    for (std::size_t i = 0; i < pixels; ++i)
        for (int ch = 0; ch < 3; ++ch) mean[ch] += img.data[i * 3 + ch];
    for (double& m : mean) m /= static_cast<double>(pixels);
    ImageTensor out = img;
    for (std::size_t i = 0; i < pixels; ++i)
        for (int ch = 0; ch < 3; ++ch)
            out.data[i * 3 + ch] = static_cast<float>(std::clamp(
                (img.data[i * 3 + ch] - mean[ch]) * c + mean[ch], 0.0, 1.0));
    return out;
}

ImageTensor apply_zoom_blur(const ImageTensor& img, const CorruptionSpec& spec) {
    const auto& factors = zoom_factors(spec.severity);
    const std::size_t total = img.data.size();
    std::vector<double> x(total);
    for (std::size_t i = 0; i < total; ++i) x[i] = img.data[i];
    std::vector<double> acc(total, 0.0);
    for (double z : factors) {
        const std::vector<double> layer = clipped_zoom(x, img.height, img.width, 3, z);
        for (std::size_t i = 0; i < total; ++i) acc[i] += layer[i];
    }
    const double denom = static_cast<double>(factors.size()) + 1.0;
    ImageTensor out = img;
    for (std::size_t i = 0; i < total; ++i)
        out.data[i] = static_cast<float>(std::clamp((x[i] + acc[i]) / denom, 0.0, 1.0));
    return out;
}

// One-sided Gaussian streak, following ImageMagick's MotionBlurImage:
// width = 2*ceil(radius)+1 taps at offsets ceil(i*cos-0.5), ceil(i*sin-0.5),
// edge-clamped, kernel exp(-i^2/(2 sigma^2)) normalized to unit sum.
std::vector<double> motion_blur(const std::vector<double>& plane, int h, int w,
                                double radius, double sigma, double angle_deg) {
    const int width = static_cast<int>(2.0 * std::ceil(radius) + 1.0);
    std::vector<double> kernel(width);
    double norm = 0.0;
    for (int i = 0; i < width; ++i) {
        kernel[i] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        norm += kernel[i];
    }
    for (double& k : kernel) k /= norm;

    const double theta = angle_deg * std::numbers::pi / 180.0;
    std::vector<int> row_off(width), col_off(width);
    for (int i = 0; i < width; ++i) {
        col_off[i] = static_cast<int>(std::ceil(i * std::cos(theta) - 0.5));
        row_off[i] = static_cast<int>(std::ceil(i * std::sin(theta) - 0.5));
    }

    std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int i = 0; i < width; ++i) {
                const int rr = std::clamp(r + row_off[i], 0, h - 1);
                const int cc = std::clamp(c + col_off[i], 0, w - 1);
                acc += kernel[i] * plane[static_cast<std::size_t>(rr) * w + cc];
            }
            out[static_cast<std::size_t>(r) * w + c] = acc;
        }
    }
    return out;
}

ImageTensor apply_snow(const ImageTensor& img, const CorruptionSpec& spec,
                       const CorruptionHooks& hooks) {
    const SnowParams& p = snow_params(spec.severity);
    const int h = img.height, w = img.width;
    const std::size_t hw = static_cast<std::size_t>(h) * w;

    std::mt19937_64 rng(spec.seed);
    std::vector<double> field;
    if (hooks.injected_field) {
        if (hooks.injected_field->size() != hw)
            throw ArgumentError("injected field size mismatch");
        field = *hooks.injected_field;
    } else {
        field.resize(hw);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& v : field) v = normal(rng);
    }
    const double scale = hooks.forced_snow_scale.value_or(p.scale);
    std::vector<double> layer(hw);
    for (std::size_t i = 0; i < hw; ++i) layer[i] = field[i] * scale + p.loc;

    layer = clipped_zoom(layer, h, w, 1, p.zoom);
    for (auto& v : layer)
        if (v < p.threshold) v = 0.0;

    // quantize like the reference's 8-bit round trip (truncating cast)
    for (auto& v : layer)
        v = static_cast<double>(static_cast<unsigned char>(std::clamp(v, 0.0, 1.0) * 255.0));

    double angle;
    if (hooks.forced_snow_angle_deg) {
        angle = *hooks.forced_snow_angle_deg;
    } else {
        std::uniform_real_distribution<double> uni(-135.0, -45.0);
        angle = uni(rng);
    }
    layer = motion_blur(layer, h, w, p.blur_radius, p.blur_sigma, angle);
    for (auto& v : layer)
        v = std::nearbyint(std::clamp(v, 0.0, 255.0)) / 255.0;

    ImageTensor out = img;
    if (!hooks.disable_snow_brightness) {
        for (std::size_t i = 0; i < hw; ++i) {
            const double r = img.data[i * 3 + 0];
            const double g = img.data[i * 3 + 1];
            const double b = img.data[i * 3 + 2];
            const double lifted_gray = (0.299 * r + 0.587 * g + 0.114 * b) * 1.5 + 0.5;
            out.data[i * 3 + 0] = static_cast<float>(p.blend * r + (1.0 - p.blend) * std::max(r, lifted_gray));
            out.data[i * 3 + 1] = static_cast<float>(p.blend * g + (1.0 - p.blend) * std::max(g, lifted_gray));
            out.data[i * 3 + 2] = static_cast<float>(p.blend * b + (1.0 - p.blend) * std::max(b, lifted_gray));
        }
    }
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double s = layer[static_cast<std::size_t>(r) * w + c] +
                             layer[static_cast<std::size_t>(h - 1 - r) * w + (w - 1 - c)];
            for (int ch = 0; ch < 3; ++ch) {
                auto& v = out.data[(static_cast<std::size_t>(r) * w + c) * 3 + ch];
                v = static_cast<float>(std::clamp(static_cast<double>(v) + s, 0.0, 1.0));
            }
        }
    }
    return out;
}

}  // namespace

ImageTensor corrupt(const ImageTensor& img, const CorruptionSpec& spec,
                    const CorruptionHooks& hooks) {
    switch (spec.kind) {
        case CorruptionKind::gaussian_noise:
            return apply_gaussian(img, spec, hooks);
        case CorruptionKind::contrast:
            return apply_contrast(img, spec);
        case CorruptionKind::zoom_blur:
            return apply_zoom_blur(img, spec);
        case CorruptionKind::snow:
            return apply_snow(img, spec, hooks);
        case CorruptionKind::identity:
            return img;
    }
    throw ArgumentError("unknown corruption kind");
}

CorruptionKind corruption_kind_from_string(const std::string& name) {
    if (name == "gaussian_noise") return CorruptionKind::gaussian_noise;
    if (name == "zoom_blur") return CorruptionKind::zoom_blur;
    if (name == "snow") return CorruptionKind::snow;
    if (name == "contrast") return CorruptionKind::contrast;
    if (name == "identity") return CorruptionKind::identity;
    throw ArgumentError("unknown corruption kind: " + name);
}

std::string to_string(CorruptionKind kind) {
    switch (kind) {
        case CorruptionKind::gaussian_noise: return "gaussian_noise";
        case CorruptionKind::zoom_blur: return "zoom_blur";
        case CorruptionKind::snow: return "snow";
        case CorruptionKind::contrast: return "contrast";
        case CorruptionKind::identity: return "identity";
    }
    throw ArgumentError("unknown corruption kind");
}

}  // namespace syncmap
