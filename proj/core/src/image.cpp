#include "syncmapv2/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <opencv2/imgcodecs.hpp>

namespace syncmap {

ImageTensor ImageTensor::zeros(int h, int w) {
    ImageTensor t;
    t.height = h;
    t.width = w;
    t.data.assign(static_cast<std::size_t>(h) * w * 3, 0.0f);
    return t;
}

LabelMap LabelMap::filled(int h, int w, std::uint16_t v) {
    LabelMap m;
    m.height = h;
    m.width = w;
    m.labels.assign(static_cast<std::size_t>(h) * w, v);
    return m;
}

ImageTensor load_image(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw IoError("no such file: " + path.string());
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty())
        throw FormatError("cannot decode image: " + path.string());
    ImageTensor out = ImageTensor::zeros(bgr.rows, bgr.cols);
    for (int r = 0; r < bgr.rows; ++r) {
        const auto* row = bgr.ptr<cv::Vec3b>(r);
        for (int c = 0; c < bgr.cols; ++c) {
            out.at(r, c, 0) = row[c][2] / 255.0f;
            out.at(r, c, 1) = row[c][1] / 255.0f;
            out.at(r, c, 2) = row[c][0] / 255.0f;
        }
    }
    return out;
}

void save_image_png(const ImageTensor& img, const std::filesystem::path& path) {
    cv::Mat bgr(img.height, img.width, CV_8UC3);
    for (int r = 0; r < img.height; ++r) {
        auto* row = bgr.ptr<cv::Vec3b>(r);
        for (int c = 0; c < img.width; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                float v = std::clamp(img.at(r, c, ch), 0.0f, 1.0f);
                row[c][2 - ch] = static_cast<unsigned char>(std::lround(v * 255.0f));
            }
        }
    }
    if (!cv::imwrite(path.string(), bgr))
        throw IoError("cannot write image: " + path.string());
}

ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw ArgumentError("output dims must be >= 1");
    if (out_h == img.height && out_w == img.width) return img;
    ImageTensor out = ImageTensor::zeros(out_h, out_w);
    const double sy = static_cast<double>(img.height) / out_h;
    const double sx = static_cast<double>(img.width) / out_w;
    for (int r = 0; r < out_h; ++r) {
        double fy = (r + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::clamp(y0, 0, img.height - 1);
        int y1c = std::clamp(y0 + 1, 0, img.height - 1);
        for (int c = 0; c < out_w; ++c) {
            double fx = (c + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x0c = std::clamp(x0, 0, img.width - 1);
            int x1c = std::clamp(x0 + 1, 0, img.width - 1);
            for (int ch = 0; ch < 3; ++ch) {
                double top = img.at(y0c, x0c, ch) * (1.0 - wx) + img.at(y0c, x1c, ch) * wx;
                double bot = img.at(y1c, x0c, ch) * (1.0 - wx) + img.at(y1c, x1c, ch) * wx;
                out.at(r, c, ch) = static_cast<float>(top * (1.0 - wy) + bot * wy);
            }
        }
    }
    return out;
}

PatchGrid split_patches(const ImageTensor& img, int rows, int cols) {
    if (rows < 1 || cols < 1) throw ArgumentError("grid dims must be >= 1");
    if (img.height % rows != 0 || img.width % cols != 0)
        throw ArgumentError("image dims not divisible by patch grid");
    PatchGrid grid;
    grid.rows = rows;
    grid.cols = cols;
    grid.patch_h = img.height / rows;
    grid.patch_w = img.width / cols;
    grid.patches.reserve(static_cast<std::size_t>(rows) * cols);
    for (int pr = 0; pr < rows; ++pr) {
        for (int pc = 0; pc < cols; ++pc) {
            ImageTensor patch = ImageTensor::zeros(grid.patch_h, grid.patch_w);
            for (int r = 0; r < grid.patch_h; ++r)
                for (int c = 0; c < grid.patch_w; ++c)
                    for (int ch = 0; ch < 3; ++ch)
                        patch.at(r, c, ch) = img.at(pr * grid.patch_h + r, pc * grid.patch_w + c, ch);
            grid.patches.push_back(std::move(patch));
        }
    }
    return grid;
}

InputSequence temporize_patch(const ImageTensor& patch, int repetitions) {
    if (repetitions < 1) throw ArgumentError("repetitions must be >= 1");
    const int dim = patch.height * 3;
    const int T = patch.width * repetitions;
    InputSequence seq;
    seq.columns.resize(dim, T);
    for (int t = 0; t < T; ++t) {
        int c = t % patch.width;
        for (int ch = 0; ch < 3; ++ch)
            for (int r = 0; r < patch.height; ++r)
                seq.columns(ch * patch.height + r, t) = patch.at(r, c, ch);
    }
    return seq;
}

LabelMap resize_nearest(const LabelMap& labels, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw ArgumentError("output dims must be >= 1");
    LabelMap out = LabelMap::filled(out_h, out_w, 0);
    const double sy = static_cast<double>(labels.height) / out_h;
    const double sx = static_cast<double>(labels.width) / out_w;
    for (int r = 0; r < out_h; ++r) {
        int src_r = std::min(labels.height - 1, static_cast<int>((r + 0.5) * sy));
        for (int c = 0; c < out_w; ++c) {
            int src_c = std::min(labels.width - 1, static_cast<int>((c + 0.5) * sx));
            out.at(r, c) = labels.at(src_r, src_c);
        }
    }
    return out;
}

LabelMap labels_to_pixels(const LabelMap& grid_labels, int out_h, int out_w,
                          int intermediate_size) {
    LabelMap mid = resize_nearest(grid_labels, intermediate_size, intermediate_size);
    return resize_nearest(mid, out_h, out_w);
}

LabelMap load_label_map_text(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    std::vector<std::vector<std::uint16_t>> rows;
    std::string line;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::vector<std::uint16_t> row;
        long v;
        while (ls >> v) {
            if (v < 0 || v > 65535)
                throw FormatError("label out of range in " + path.string());
            row.push_back(static_cast<std::uint16_t>(v));
        }
        if (!ls.eof())
            throw FormatError("non-integer token in " + path.string());
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError("empty label grid: " + path.string());
    const std::size_t w = rows[0].size();
    for (const auto& row : rows)
        if (row.size() != w)
            throw FormatError("ragged label grid: " + path.string());
    LabelMap out = LabelMap::filled(static_cast<int>(rows.size()), static_cast<int>(w), 0);
    for (int r = 0; r < out.height; ++r)
        for (int c = 0; c < out.width; ++c)
            out.at(r, c) = rows[r][c];
    return out;
}

LabelMap load_label_map(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw IoError("no such file: " + path.string());
    if (path.extension() != ".png") return load_label_map_text(path);
    cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (raw.empty())
        throw FormatError("cannot decode label map: " + path.string());
    if (raw.channels() != 1)
        throw FormatError("label map must be single-channel: " + path.string());
    LabelMap out = LabelMap::filled(raw.rows, raw.cols, 0);
    if (raw.depth() == CV_16U) {
        for (int r = 0; r < raw.rows; ++r) {
            const auto* row = raw.ptr<std::uint16_t>(r);
            for (int c = 0; c < raw.cols; ++c) out.at(r, c) = row[c];
        }
    } else if (raw.depth() == CV_8U) {
        for (int r = 0; r < raw.rows; ++r) {
            const auto* row = raw.ptr<std::uint8_t>(r);
            for (int c = 0; c < raw.cols; ++c) out.at(r, c) = row[c];
        }
    } else {
        throw FormatError("label map must be 8- or 16-bit: " + path.string());
    }
    return out;
}

void save_label_map_png(const LabelMap& labels, const std::filesystem::path& path) {
    cv::Mat raw(labels.height, labels.width, CV_16UC1);
    for (int r = 0; r < labels.height; ++r) {
        auto* row = raw.ptr<std::uint16_t>(r);
        for (int c = 0; c < labels.width; ++c) row[c] = labels.at(r, c);
    }
    if (!cv::imwrite(path.string(), raw))
        throw IoError("cannot write label map: " + path.string());
}

}  // namespace syncmap
