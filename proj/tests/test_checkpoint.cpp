#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "canids/checkpoint.hpp"
#include "canids/error.hpp"

using namespace canids;

namespace {

ModelParams sample(ModelKind kind) {
  HyperParams hp;
  hp.hidden = 5;
  hp.layers = 2;
  hp.heads = 2;
  hp.seed = 99;
  hp.learning_rate = 0.003;
  auto p = init_params(kind, 2, hp);
  p.class_weights = {0.5555555555555556, 5.0};
  p.input_shift = {0.14285714285714285, -1e-300};
  p.input_scale = {0.07, 1.0 / 3.0};
  // Awkward values that a decimal payload would not preserve.
  p.tensors.back().values()[0] = 0.1 + 0.2;
  p.tensors.back().values()[1] = -4.9406564584124654e-324;
  return p;
}

}  // namespace

TEST_CASE("checkpoints round-trip exactly") {
  for (auto kind : kAllModels) {
    const auto p = sample(kind);
    const auto bytes = serialize_params(p);
    CHECK(bytes.rfind("canids-checkpoint 1\nkind " + std::string(to_string(kind)) + "\n", 0) == 0);
    CHECK(deserialize_params(bytes) == p);
  }
}

TEST_CASE("checkpoint files") {
  const auto dir = std::filesystem::temp_directory_path() / "canids_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "m.ckpt";
  const auto p = sample(ModelKind::gat);
  write_checkpoint(p, path);
  CHECK(read_checkpoint(path) == p);
  CHECK_THROWS_AS(read_checkpoint(dir / "missing.ckpt"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("damaged checkpoints are rejected") {
  const auto bytes = serialize_params(sample(ModelKind::sage));
  CHECK_THROWS_AS(deserialize_params(""), DataError);
  CHECK_THROWS_AS(deserialize_params(bytes.substr(0, bytes.size() - 3)), DataError);
  CHECK_THROWS_AS(deserialize_params(bytes.substr(0, bytes.size() / 3)), DataError);
  CHECK_THROWS_AS(deserialize_params(bytes + "x"), DataError);

  std::string version = bytes;
  version.replace(0, std::string("canids-checkpoint 1").size(), "canids-checkpoint 9");
  CHECK_THROWS_AS(deserialize_params(version), DataError);

  std::string scale = bytes;
  scale.replace(scale.find("input_scale 0.070000000000000007"), 32, "input_scale -0.07");
  CHECK_THROWS_AS(deserialize_params(scale), DataError);
  std::string short_shift = bytes;
  short_shift.replace(short_shift.find(" -1e-300"), 8, "");
  CHECK_THROWS_AS(deserialize_params(short_shift), DataError);

  std::string kind = bytes;
  kind.replace(kind.find("kind sage"), 9, "kind cnn9");
  CHECK_THROWS_AS(deserialize_params(kind), DataError);
}

TEST_CASE("tensor shapes are validated") {
  const auto bytes = serialize_params(sample(ModelKind::gcn));
  // Same element count, different shape.
  std::string shape = bytes;
  const auto at = shape.find("tensor gcn0.w 2 5");
  REQUIRE(at != std::string::npos);
  shape.replace(at, 17, "tensor gcn0.w 5 2");
  CHECK_THROWS_AS(deserialize_params(shape), ShapeError);

  std::string renamed = bytes;
  renamed.replace(renamed.find("gcn0.b"), 6, "gcn0.q");
  CHECK_THROWS_AS(deserialize_params(renamed), ShapeError);

  // Hidden size disagreeing with the tensors.
  std::string hidden = bytes;
  hidden.replace(hidden.find("hidden 5"), 8, "hidden 6");
  CHECK_THROWS(deserialize_params(hidden));
}
