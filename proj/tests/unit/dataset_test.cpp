#include "occtrack/io/dataset.hpp"
#include "occtrack/simulator.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

using namespace occtrack;

namespace
{
Dataset small_dataset(bool controls)
{
    Scene s = controls ? presets::controlled_motion(3) : presets::free_motion(3);
    s.duration = 0.2;
    return simulate(s);
}

std::string serialize(const Dataset& d)
{
    std::ostringstream out(std::ios::binary);
    write_dataset(out, d);
    return out.str();
}

Dataset parse(const std::string& bytes)
{
    std::istringstream in(bytes, std::ios::binary);
    return read_dataset(in);
}
}  // namespace

TEST(Dataset, RoundTripIsBitExact)
{
    for (bool controls : {false, true})
    {
        const Dataset d = small_dataset(controls);
        const std::string bytes = serialize(d);
        const Dataset back = parse(bytes);
        EXPECT_EQ(back.camera, d.camera);
        EXPECT_EQ(back.has_controls, controls);
        EXPECT_TRUE(back.has_ground_truth);
        ASSERT_EQ(back.frames.size(), d.frames.size());
        for (std::size_t k = 0; k < d.frames.size(); ++k)
        {
            EXPECT_EQ(back.frames[k].timestamp, d.frames[k].timestamp);
            EXPECT_EQ(std::memcmp(back.frames[k].depth.depths.data(), d.frames[k].depth.depths.data(),
                                  d.frames[k].depth.size() * sizeof(float)),
                      0);
            EXPECT_EQ(back.frames[k].ground_truth->translation, d.frames[k].ground_truth->translation);
            EXPECT_EQ(back.frames[k].ground_truth->rotation.coeffs(), d.frames[k].ground_truth->rotation.coeffs());
            if (controls)
            {
                EXPECT_EQ(back.frames[k].control->angular, d.frames[k].control->angular);
            }
        }
        EXPECT_EQ(serialize(back), bytes);
    }
}

TEST(Dataset, FileSizeMatchesLayout)
{
    const Dataset d = small_dataset(true);
    const std::size_t header = 4 + 1 + 1 + 2 + 3 * 4 + 5 * 8;
    const std::size_t frame = 8 + 4 * d.camera.pixel_count() + 7 * 8 + 6 * 8;
    EXPECT_EQ(serialize(d).size(), header + d.frames.size() * frame);
}

TEST(Dataset, HeaderRoundTrip)
{
    DatasetHeader h;
    h.has_ground_truth = true;
    h.frame_count = 42;
    h.camera.width = 64;
    h.camera.fx = 77.5;
    std::stringstream io;
    write_dataset_header(io, h);
    EXPECT_EQ(read_dataset_header(io), h);
}

TEST(Dataset, RejectsCorruption)
{
    const std::string good = serialize(small_dataset(false));

    std::string bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_THROW(parse(bad_magic), DatasetError);

    std::string bad_version = good;
    bad_version[4] = 9;
    EXPECT_THROW(parse(bad_version), DatasetError);

    std::string bad_flags = good;
    bad_flags[5] = 0x10;
    EXPECT_THROW(parse(bad_flags), DatasetError);

    EXPECT_THROW(parse(good.substr(0, good.size() - 3)), DatasetError);
    EXPECT_THROW(parse(good.substr(0, 10)), DatasetError);
    EXPECT_THROW(parse(good + "x"), DatasetError);

    // Zero width camera.
    std::string bad_camera = good;
    std::fill(bad_camera.begin() + 8, bad_camera.begin() + 12, '\0');
    EXPECT_THROW(parse(bad_camera), DatasetError);
}

TEST(Dataset, RejectsNonIncreasingTimestamps)
{
    Dataset d = small_dataset(false);
    d.frames[2].timestamp = d.frames[1].timestamp;
    EXPECT_THROW(serialize(d), DatasetError);
}

TEST(Dataset, RejectsChannelMismatch)
{
    Dataset d = small_dataset(false);
    d.frames[1].control = Twist{};
    EXPECT_THROW(d.validate(), DatasetError);
    d = small_dataset(false);
    d.frames[1].depth = DepthImage(3, 3);
    EXPECT_THROW(d.validate(), DatasetError);
}

TEST(Dataset, SaveAndLoad)
{
    const Dataset d = small_dataset(true);
    const auto path = std::filesystem::temp_directory_path() / "occtrack_dataset_test.dtrk";
    save_dataset(path.string(), d);
    const Dataset back = load_dataset(path.string());
    EXPECT_EQ(serialize(back), serialize(d));
    std::filesystem::remove(path);
    EXPECT_THROW(load_dataset("/nonexistent/dir/x.dtrk"), IoError);
}
