#include <gtest/gtest.h>

#include "ddim/tensor.hpp"

using namespace ddim;

TEST(Tensor, ShapeAndDataAgree) {
    Tensor<float> t(Shape{2, 3, 4});
    EXPECT_EQ(t.size(), 24u);
    EXPECT_EQ(t.rank(), 3u);
    EXPECT_EQ(shape_numel(t.shape()), t.size());
}

TEST(Tensor, RejectsZeroDimension) {
    EXPECT_THROW(Tensor<float>(Shape{2, 0}), ShapeError);
    EXPECT_THROW(Tensor<float>(Shape{}), ShapeError);
}

TEST(Tensor, RejectsDataLengthMismatch) {
    EXPECT_THROW(Tensor<float>(Shape{2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
}

TEST(Tensor, RowMajorIndexing) {
    Tensor<double> t(Shape{2, 3}, std::vector<double>{0, 1, 2, 3, 4, 5});
    EXPECT_EQ(t.at({1, 2}), 5.0);
    EXPECT_EQ(t.at({0, 1}), 1.0);
    EXPECT_THROW(t.at({2, 0}), std::out_of_range);
}

TEST(Tensor, ReshapeKeepsData) {
    Tensor<float> t(Shape{2, 3}, std::vector<float>{0, 1, 2, 3, 4, 5});
    const auto r = t.reshaped({3, 2});
    EXPECT_EQ(r.shape(), (Shape{3, 2}));
    EXPECT_EQ(r[4], 4.0f);
    EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
}

TEST(Tensor, CastChangesPrecision) {
    Tensor<float> t(Shape{2}, std::vector<float>{0.5f, -1.25f});
    const auto d = t.cast<double>();
    EXPECT_EQ(d[0], 0.5);
    EXPECT_EQ(d[1], -1.25);
}

TEST(Tensor, ImageDimsAcceptsRank3And4) {
    const auto a = image_dims({4, 6, 2}, "test");
    EXPECT_EQ(a.batch, 1u);
    EXPECT_EQ(a.channels, 2u);
    const auto b = image_dims({3, 4, 6, 2}, "test");
    EXPECT_EQ(b.batch, 3u);
    EXPECT_THROW(image_dims({4, 6}, "test"), ShapeError);
}
