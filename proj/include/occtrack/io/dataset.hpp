#pragma once

#include "occtrack/error.hpp"
#include "occtrack/geometry/camera.hpp"
#include "occtrack/geometry/pose.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace occtrack
{
/// Malformed or inconsistent dataset content.
class DatasetError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct Frame
{
    double timestamp = 0.0;
    DepthImage depth;
    std::optional<Pose> ground_truth;
    /// Object twist from the previous frame to this one (zero on the first frame).
    std::optional<Twist> control;
};

struct Dataset
{
    CameraIntrinsics camera;
    bool has_ground_truth = false;
    bool has_controls = false;
    std::vector<Frame> frames;

    void validate() const
    {
        camera.validate();
        for (std::size_t k = 0; k < frames.size(); ++k)
        {
            const Frame& f = frames[k];
            if (f.depth.width != camera.width || f.depth.height != camera.height ||
                f.depth.size() != camera.pixel_count())
                throw DatasetError("frame " + std::to_string(k) + ": image size differs from header");
            if (k > 0 && !(f.timestamp > frames[k - 1].timestamp))
                throw DatasetError("frame " + std::to_string(k) + ": timestamps must increase strictly");
            if (f.ground_truth.has_value() != has_ground_truth)
                throw DatasetError("frame " + std::to_string(k) + ": ground-truth channel mismatch");
            if (f.control.has_value() != has_controls)
                throw DatasetError("frame " + std::to_string(k) + ": control channel mismatch");
        }
    }
};

/// Everything in the file before the first frame.
struct DatasetHeader
{
    std::uint8_t version = 1;
    bool has_ground_truth = false;
    bool has_controls = false;
    std::uint32_t frame_count = 0;
    CameraIntrinsics camera;

    friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

/**
 * Binary layout, little-endian throughout:
 *
 *   "DTRK" | u8 version | u8 flags (1: pose, 2: twist) | u16 reserved
 *   u32 width | u32 height | u32 frame count
 *   f64 fx, fy, cx, cy, max range
 *   per frame: f64 timestamp | f32 depth[width * height] (NaN = invalid)
 *              [7 x f64 tx ty tz qw qx qy qz] [6 x f64 vx vy vz wx wy wz]
 */
namespace dataset_format
{
inline constexpr std::array<char, 4> kMagic{'D', 'T', 'R', 'K'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::uint8_t kFlagPose = 1;
inline constexpr std::uint8_t kFlagTwist = 2;
}  // namespace dataset_format

namespace detail
{
template <typename T>
T to_little_endian(T value)
{
    if constexpr (std::endian::native == std::endian::big)
    {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return value;
}

class LeWriter
{
public:
    explicit LeWriter(std::ostream& out) : out_(out) {}

    template <typename T>
    void put(T value)
    {
        const auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(to_little_endian(value));
        out_.write(bytes.data(), bytes.size());
    }

    void put_bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }

private:
    std::ostream& out_;
};

class LeReader
{
public:
    explicit LeReader(std::istream& in) : in_(in) {}

    template <typename T>
    T get()
    {
        std::array<char, sizeof(T)> bytes;
        get_bytes(bytes.data(), bytes.size());
        return to_little_endian(std::bit_cast<T>(bytes));
    }

    void get_bytes(char* data, std::size_t n)
    {
        in_.read(data, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw DatasetError("dataset: unexpected end of file");
    }

private:
    std::istream& in_;
};
}  // namespace detail

inline void write_dataset_header(std::ostream& out, const DatasetHeader& h)
{
    detail::LeWriter w(out);
    w.put_bytes(dataset_format::kMagic.data(), dataset_format::kMagic.size());
    w.put<std::uint8_t>(h.version);
    w.put<std::uint8_t>(static_cast<std::uint8_t>((h.has_ground_truth ? dataset_format::kFlagPose : 0) |
                                                  (h.has_controls ? dataset_format::kFlagTwist : 0)));
    w.put<std::uint16_t>(0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(h.camera.width));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(h.camera.height));
    w.put<std::uint32_t>(h.frame_count);
    for (double v : {h.camera.fx, h.camera.fy, h.camera.cx, h.camera.cy, h.camera.max_range}) w.put(v);
}

inline DatasetHeader read_dataset_header(std::istream& in)
{
    detail::LeReader r(in);
    std::array<char, 4> magic;
    r.get_bytes(magic.data(), magic.size());
    if (magic != dataset_format::kMagic) throw DatasetError("dataset: bad magic, not a DTRK file");
    DatasetHeader h;
    h.version = r.get<std::uint8_t>();
    if (h.version != dataset_format::kVersion)
        throw DatasetError("dataset: unsupported version " + std::to_string(h.version));
    const auto flags = r.get<std::uint8_t>();
    if (flags & ~(dataset_format::kFlagPose | dataset_format::kFlagTwist))
        throw DatasetError("dataset: unknown flag bits");
    h.has_ground_truth = (flags & dataset_format::kFlagPose) != 0;
    h.has_controls = (flags & dataset_format::kFlagTwist) != 0;
    (void)r.get<std::uint16_t>();
    h.camera.width = static_cast<int>(r.get<std::uint32_t>());
    h.camera.height = static_cast<int>(r.get<std::uint32_t>());
    h.frame_count = r.get<std::uint32_t>();
    h.camera.fx = r.get<double>();
    h.camera.fy = r.get<double>();
    h.camera.cx = r.get<double>();
    h.camera.cy = r.get<double>();
    h.camera.max_range = r.get<double>();
    try
    {
        h.camera.validate();
    }
    catch (const std::invalid_argument& e)
    {
        throw DatasetError(std::string("dataset header: ") + e.what());
    }
    return h;
}

inline void write_dataset(std::ostream& out, const Dataset& data)
{
    data.validate();
    DatasetHeader h;
    h.has_ground_truth = data.has_ground_truth;
    h.has_controls = data.has_controls;
    h.frame_count = static_cast<std::uint32_t>(data.frames.size());
    h.camera = data.camera;
    write_dataset_header(out, h);

    detail::LeWriter w(out);
    for (const Frame& f : data.frames)
    {
        w.put(f.timestamp);
        for (float z : f.depth.depths) w.put(z);
        if (data.has_ground_truth)
        {
            const Pose& p = *f.ground_truth;
            for (double v : {p.translation.x(), p.translation.y(), p.translation.z(), p.rotation.w(),
                             p.rotation.x(), p.rotation.y(), p.rotation.z()})
                w.put(v);
        }
        if (data.has_controls)
        {
            const Twist& u = *f.control;
            for (double v : {u.linear.x(), u.linear.y(), u.linear.z(), u.angular.x(), u.angular.y(),
                             u.angular.z()})
                w.put(v);
        }
    }
    if (!out) throw IoError("dataset: write failed");
}

inline Dataset read_dataset(std::istream& in)
{
    const DatasetHeader h = read_dataset_header(in);
    detail::LeReader r(in);
    Dataset data;
    data.camera = h.camera;
    data.has_ground_truth = h.has_ground_truth;
    data.has_controls = h.has_controls;
    data.frames.reserve(h.frame_count);
    for (std::uint32_t k = 0; k < h.frame_count; ++k)
    {
        Frame f;
        f.timestamp = r.get<double>();
        f.depth = DepthImage(h.camera.width, h.camera.height, f.timestamp);
        for (float& z : f.depth.depths) z = r.get<float>();
        if (h.has_ground_truth)
        {
            Pose p;
            p.translation.x() = r.get<double>();
            p.translation.y() = r.get<double>();
            p.translation.z() = r.get<double>();
            p.rotation.w() = r.get<double>();
            p.rotation.x() = r.get<double>();
            p.rotation.y() = r.get<double>();
            p.rotation.z() = r.get<double>();
            f.ground_truth = p;
        }
        if (h.has_controls)
        {
            Twist u;
            for (int i = 0; i < 3; ++i) u.linear[i] = r.get<double>();
            for (int i = 0; i < 3; ++i) u.angular[i] = r.get<double>();
            f.control = u;
        }
        data.frames.push_back(std::move(f));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw DatasetError("dataset: trailing bytes after last frame");
    data.validate();
    return data;
}

inline void save_dataset(const std::string& path, const Dataset& data)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write dataset '" + path + "'");
    write_dataset(out, data);
}

inline Dataset load_dataset(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset '" + path + "'");
    return read_dataset(in);
}

}  // namespace occtrack
