#include <array>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include <json.hpp>

#include "qsm/pipeline.hpp"

namespace qsm {

namespace {

constexpr const char* kStageOrder[] = {"generate", "label", "train", "optimize", "mine", "report"};
constexpr const char* kVersion = "0.1.0";

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw NumericalError("sha256 initialisation failed");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), std::size_t(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::ostringstream hex;
  for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

RunManifest RunManifest::load_or_empty(const std::filesystem::path& dir) {
  RunManifest m;
  m.dir_ = dir;
  const auto path = dir / "manifest.json";
  if (!std::filesystem::exists(path)) return m;
  std::ifstream in(path, std::ios::binary);
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != "qsm-manifest") throw DataError("manifest.json has an unknown format");
    if (j.contains("config")) m.config_json_ = j.at("config").dump(2);
    for (const auto& [name, s] : j.at("stages").items()) {
      Stage st;
      st.seconds = s.at("seconds").get<double>();
      for (const auto& [file, hash] : s.at("files").items()) st.files[file] = hash.get<std::string>();
      m.stages_[name] = std::move(st);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest.json: ") + e.what());
  }
  return m;
}

void RunManifest::save() const {
  nlohmann::ordered_json j;
  j["format"] = "qsm-manifest";
  j["software_version"] = kVersion;
  if (!config_json_.empty()) j["config"] = nlohmann::ordered_json::parse(config_json_);
  auto& stages = j["stages"] = nlohmann::ordered_json::object();
  for (const char* name : kStageOrder) {
    const auto it = stages_.find(name);
    if (it == stages_.end()) continue;
    nlohmann::ordered_json s;
    s["seconds"] = it->second.seconds;
    s["files"] = it->second.files;
    stages[name] = s;
  }
  std::filesystem::create_directories(dir_);
  std::ofstream out(dir_ / "manifest.json", std::ios::binary);
  if (!out) throw DataError("cannot write " + (dir_ / "manifest.json").string());
  out << j.dump(2) << '\n';
}

const RunManifest::Stage& RunManifest::stage(const std::string& name) const {
  const auto it = stages_.find(name);
  if (it == stages_.end())
    throw DataError("manifest in " + dir_.string() + " has no '" + name + "' stage; run it first");
  return it->second;
}

std::filesystem::path RunManifest::input(const std::string& stage_name, const std::string& file) const {
  const auto& st = stage(stage_name);
  const auto it = st.files.find(file);
  if (it == st.files.end())
    throw DataError("stage '" + stage_name + "' did not record " + file);
  const auto path = dir_ / file;
  if (!std::filesystem::exists(path)) throw DataError("file " + path.string() + " listed in manifest is missing");
  if (sha256_file(path) != it->second)
    throw DataError("file " + path.string() + " no longer matches its manifest hash");
  return path;
}

void RunManifest::record(const std::string& stage_name, const std::vector<std::string>& files,
                         double seconds) {
  // A rerun stage invalidates everything downstream of it.
  bool downstream = false;
  for (const char* name : kStageOrder) {
    if (downstream) stages_.erase(name);
    if (stage_name == name) downstream = true;
  }
  Stage st;
  st.seconds = seconds;
  for (const auto& f : files) st.files[f] = sha256_file(dir_ / f);
  stages_[stage_name] = std::move(st);
}

}  // namespace qsm
