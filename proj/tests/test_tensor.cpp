#include "doctest.h"
#include "ostr/tensor.hpp"

using ostr::Tensor;

TEST_CASE("tensor shape and element count") {
  Tensor t({2, 3, 4});
  CHECK(t.ndim() == 3);
  CHECK(t.dim(0) == 2);
  CHECK(t.dim(1) == 3);
  CHECK(t.dim(2) == 4);
  CHECK(t.numel() == 24);
  for (int i = 0; i < t.numel(); ++i) CHECK(t[i] == 0.0);
}

TEST_CASE("tensor row-major indexing") {
  Tensor t({2, 3});
  t.at(0, 0) = 1.0;
  t.at(0, 2) = 2.0;
  t.at(1, 0) = 3.0;
  CHECK(t[0] == 1.0);
  CHECK(t[2] == 2.0);
  CHECK(t[3] == 3.0);

  Tensor u({2, 2, 2, 2});
  u.at(1, 0, 1, 0) = 7.0;
  CHECK(u[8 + 0 + 2 + 0] == 7.0);
}

TEST_CASE("tensor factories") {
  Tensor z = Tensor::zeros({3});
  Tensor f = Tensor::full({2, 2}, 1.5);
  Tensor s = Tensor::scalar(-2.0);
  CHECK(z.numel() == 3);
  for (int i = 0; i < 4; ++i) CHECK(f[i] == 1.5);
  CHECK(s.ndim() == 1);
  CHECK(s.numel() == 1);
  CHECK(s[0] == -2.0);
}

TEST_CASE("tensor same_shape and bitwise_equal") {
  Tensor a({2, 3});
  Tensor b({2, 3});
  Tensor c({3, 2});
  CHECK(a.same_shape(b));
  CHECK(!a.same_shape(c));
  CHECK(bitwise_equal(a, b));
  b[5] = 1e-300;
  CHECK(!bitwise_equal(a, b));
}

TEST_CASE("tensor fill") {
  Tensor a({4});
  a.fill(0.25);
  for (int i = 0; i < 4; ++i) CHECK(a[i] == 0.25);
}
