#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "rcm/parameter_store.hpp"

using namespace rcm;
namespace fs = std::filesystem;

TEST(ParameterStore, InsertionOrderAndUniqueness) {
  ParameterStore p;
  p.add("z", Tensor::zeros({2}));
  p.add("a", Tensor::zeros({3, 1}));
  p.add("m", Tensor::zeros({1}));
  std::vector<std::string> names;
  for (const auto& [n, t] : p) names.push_back(n);
  EXPECT_EQ(names, (std::vector<std::string>{"z", "a", "m"}));
  EXPECT_EQ(p.total_elements(), 6u);
  EXPECT_THROW(p.add("a", Tensor::zeros({1})), InvalidArgument);
  EXPECT_THROW(p.get("missing"), InvalidArgument);
  EXPECT_TRUE(p.contains("m"));
}

TEST(ParameterStore, CloneIsDeepAndCopyChecksShapes) {
  ParameterStore p;
  p.add("w", Tensor::full({2}, 1.0, true));
  auto c = p.clone(false);
  EXPECT_FALSE(c.get("w").requires_grad());
  c.get("w").mutable_data()[0] = 9.0;
  EXPECT_EQ(p.get("w").data()[0], 1.0);
  p.copy_values_from(c);
  EXPECT_EQ(p.get("w").data()[0], 9.0);
  EXPECT_TRUE(p.get("w").requires_grad());

  ParameterStore other;
  other.add("w", Tensor::zeros({3}));
  EXPECT_THROW(p.copy_values_from(other), InvalidArgument);
}

TEST(Checkpoint, RoundTripIsExact) {
  auto path = fs::temp_directory_path() / "rcm_test_ckpt.bin";
  std::vector<TensorRecord> recs{{"a.weight", {2, 3}, {1.5, -2.25, 3e-300, 0.1, 1e300, -0.0}},
                                 {"scalar", {}, {42.0}},
                                 {"ünicode", {1}, {7.0}}};
  write_checkpoint(path, recs);
  auto back = read_checkpoint(path);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].name, recs[i].name);
    EXPECT_EQ(back[i].shape, recs[i].shape);
    ASSERT_EQ(back[i].values.size(), recs[i].values.size());
    EXPECT_EQ(std::memcmp(back[i].values.data(), recs[i].values.data(), recs[i].values.size() * 8), 0);
  }
}

TEST(Checkpoint, LayoutIsDocumentedLittleEndian) {
  auto path = fs::temp_directory_path() / "rcm_test_ckpt_layout.bin";
  write_checkpoint(path, {{"ab", {1}, {1.0}}});
  std::ifstream is(path, std::ios::binary);
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(is)), {});
  // magic(8) + count(8) + name_len(4) + name(2) + rank(4) + dim(8) + value(8)
  ASSERT_EQ(b.size(), 42u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 8), "RCMCKPT1");
  EXPECT_EQ(b[8], 1);
  EXPECT_EQ(b[16], 2);
  EXPECT_EQ(b[20], 'a');
  EXPECT_EQ(b[22], 1);
  EXPECT_EQ(b[26], 1);
  // 1.0 = 0x3FF0000000000000
  EXPECT_EQ(b[40], 0xF0);
  EXPECT_EQ(b[41], 0x3F);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  auto dir = fs::temp_directory_path();
  EXPECT_THROW(read_checkpoint(dir / "rcm_no_such_ckpt.bin"), IoError);
  std::ofstream(dir / "rcm_bad_magic.bin") << "NOTACKPTxxxxxxxx";
  EXPECT_THROW(read_checkpoint(dir / "rcm_bad_magic.bin"), IoError);
  auto path = dir / "rcm_truncated.bin";
  write_checkpoint(path, {{"w", {4}, {1, 2, 3, 4}}});
  fs::resize_file(path, fs::file_size(path) - 3);
  EXPECT_THROW(read_checkpoint(path), IoError);
  EXPECT_THROW(write_checkpoint(dir / "rcm_shape_mismatch.bin", {{"w", {3}, {1.0}}}), InvalidArgument);
}
