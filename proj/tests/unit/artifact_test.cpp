#include "sensorsched/artifact.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace sensorsched {
namespace {

namespace fs = std::filesystem;

class ArtifactTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("sensorsched_artifact_") + info->name());
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  static std::string Slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

TEST_F(ArtifactTest, MeshSaveLoadAndOverwriteGuard) {
  const auto mesh = Mesh::Enumerate({2, 0.5, 3.0});
  const fs::path path = dir_ / "sub" / "mesh.bin";
  SaveMesh(path, mesh, 7, false);
  EXPECT_FALSE(fs::exists(path.string() + ".tmp"));
  const auto loaded = LoadMesh(path);
  EXPECT_EQ(loaded.mesh.IdentityHash(), mesh.IdentityHash());
  EXPECT_EQ(loaded.source_hash, 7u);
  EXPECT_THROW(SaveMesh(path, mesh, 7, false), ArtifactError);
  EXPECT_NO_THROW(SaveMesh(path, mesh, 8, true));
  EXPECT_EQ(LoadMesh(path).source_hash, 8u);
}

TEST_F(ArtifactTest, LoadErrorsNameThePath) {
  EXPECT_THROW(LoadMesh(dir_ / "missing.bin"), ArtifactError);
  fs::create_directories(dir_);
  const fs::path junk = dir_ / "junk.bin";
  std::ofstream(junk) << "garbage";
  try {
    LoadMesh(junk);
    FAIL() << "expected ArtifactError";
  } catch (const ArtifactError& e) {
    EXPECT_NE(std::string(e.what()).find("junk.bin"), std::string::npos);
  }
}

TEST_F(ArtifactTest, ValueTableSaveLoad) {
  SynthesisConfig config;
  config.beta = 0.9;
  config.mesh = {1, 0.5, 3.0};
  config.cost = SensorCostSpec::Cardinality();
  auto mesh = std::make_shared<const Mesh>(Mesh::Enumerate(config.mesh));
  const auto table = Synthesize(config, test::ScalarModel(), mesh);
  const fs::path path = dir_ / "policy.bin";
  SaveValueTable(path, table, config, 99, false);
  const auto loaded = LoadValueTable(path, mesh);
  EXPECT_EQ(loaded.table.values, table.values);
  EXPECT_EQ(loaded.header.source_hash, 99u);
  EXPECT_THROW(SaveValueTable(path, table, config, 99, false), ArtifactError);
  auto other = std::make_shared<const Mesh>(Mesh::Enumerate({1, 0.5, 2.0}));
  EXPECT_THROW(LoadValueTable(path, other), ArtifactError);
}

TEST_F(ArtifactTest, DirectoryLockIsExclusive) {
  {
    const DirectoryLock lock(dir_);
    EXPECT_TRUE(fs::exists(dir_ / ".sensorsched.lock"));
    EXPECT_THROW(DirectoryLock{dir_}, ArtifactError);
  }
  EXPECT_FALSE(fs::exists(dir_ / ".sensorsched.lock"));
  EXPECT_NO_THROW(DirectoryLock{dir_});
}

TEST_F(ArtifactTest, CsvHeaderAndQuoting) {
  const fs::path path = dir_ / "t.csv";
  CsvWriter csv(path, "demo", 2, {"a", "b"}, false);
  csv.Row({"1", "x,y"});
  csv.Row({"say \"hi\"", ""});
  EXPECT_THROW(csv.Row({"only one"}), std::invalid_argument);
  EXPECT_FALSE(fs::exists(path));  // not committed before Close()
  csv.Close();
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(
                    CsvWriter::SchemaHash("demo", 2, {"a", "b"})));
  const std::string expected = std::string("# schema=demo version=2 hash=") + hash +
                               "\na,b\n1,\"x,y\"\n\"say \"\"hi\"\"\",\n";
  EXPECT_EQ(Slurp(path), expected);
  EXPECT_THROW(CsvWriter(path, "demo", 2, {"a"}, false), ArtifactError);
}

TEST(CsvWriter, SchemaHashTracksColumns) {
  const auto h = CsvWriter::SchemaHash("s", 1, {"a", "b"});
  EXPECT_EQ(h, CsvWriter::SchemaHash("s", 1, {"a", "b"}));
  EXPECT_NE(h, CsvWriter::SchemaHash("s", 1, {"a", "c"}));
  EXPECT_NE(h, CsvWriter::SchemaHash("s", 2, {"a", "b"}));
  EXPECT_NE(h, CsvWriter::SchemaHash("s", 1, {"ab"}));
}

TEST(Format, FixedAndExact) {
  EXPECT_EQ(FormatFixed(6.42374, 4), "6.4237");
  EXPECT_EQ(FormatFixed(std::numeric_limits<double>::infinity(), 4), "inf");
  EXPECT_EQ(FormatExact(0.1), "0.1");
  EXPECT_EQ(std::stod(FormatExact(1.0 / 3.0)), 1.0 / 3.0);
}

}  // namespace
}  // namespace sensorsched
