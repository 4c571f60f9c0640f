#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "syncmapv2/errors.hpp"

namespace syncmap {

// H x W x 3 raster, row-major RGB, values in [0,1].
struct ImageTensor {
    int height = 0;
    int width = 0;
    std::vector<float> data;  // height*width*3

    float& at(int r, int c, int ch) { return data[(static_cast<std::size_t>(r) * width + c) * 3 + ch]; }
    float at(int r, int c, int ch) const { return data[(static_cast<std::size_t>(r) * width + c) * 3 + ch]; }

    static ImageTensor zeros(int h, int w);
};

// Integer segment assignment per cell; kVoidLabel marks ignored pixels.
inline constexpr std::uint16_t kVoidLabel = 65535;

struct LabelMap {
    int height = 0;
    int width = 0;
    std::vector<std::uint16_t> labels;  // height*width, row-major

    std::uint16_t& at(int r, int c) { return labels[static_cast<std::size_t>(r) * width + c]; }
    std::uint16_t at(int r, int c) const { return labels[static_cast<std::size_t>(r) * width + c]; }

    static LabelMap filled(int h, int w, std::uint16_t v);
};

// Regular decomposition of a resized image into rows x cols sub-images.
struct PatchGrid {
    int rows = 0;
    int cols = 0;
    int patch_h = 0;
    int patch_w = 0;
    std::vector<ImageTensor> patches;  // rows*cols, row-major
};

// Temporized patch: columns are time steps, rows the per-step input vector.
struct InputSequence {
    Eigen::MatrixXd columns;  // dim x T
    int length() const { return static_cast<int>(columns.cols()); }
    int dim() const { return static_cast<int>(columns.rows()); }
};

// Decodes an 8-bit PNG/JPEG/PPM file; byte b maps to b/255.
ImageTensor load_image(const std::filesystem::path& path);

// Writes an 8-bit PNG; values are clipped to [0,1] and rounded to bytes.
void save_image_png(const ImageTensor& img, const std::filesystem::path& path);

// Bilinear resampling with half-pixel-centered sampling and edge clamping.
ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w);

// Splits into rows x cols equal patches; dims must divide exactly.
PatchGrid split_patches(const ImageTensor& img, int rows, int cols);

// Stacks the R, G, B planes vertically into a (3*patch_h) x patch_w array,
// tiles it K times horizontally, and emits its columns as time steps.
InputSequence temporize_patch(const ImageTensor& patch, int repetitions);

// Nearest-neighbor upscaling of grid labels to intermediate_size^2 pixels,
// then nearest-neighbor resizing to (out_h, out_w). Labels never blend.
LabelMap labels_to_pixels(const LabelMap& grid_labels, int out_h, int out_w,
                          int intermediate_size = 288);

// Nearest-neighbor label resize (half-pixel-centered source mapping).
LabelMap resize_nearest(const LabelMap& labels, int out_h, int out_w);

// Ground-truth ingestion: 16-bit single-channel PNG (void = 65535) or a
// whitespace-separated integer grid, chosen by file extension (.png vs rest).
LabelMap load_label_map(const std::filesystem::path& path);
void save_label_map_png(const LabelMap& labels, const std::filesystem::path& path);
LabelMap load_label_map_text(const std::filesystem::path& path);

}  // namespace syncmap
