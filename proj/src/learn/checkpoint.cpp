#include "motionxfer/checkpoint.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <sstream>

#include "motionxfer/error.hpp"
#include "motionxfer/warp.hpp"

namespace mxf {
namespace {

constexpr const char* kFormat = "motionxfer-checkpoint";

using torch::serialize::InputArchive;
using torch::serialize::OutputArchive;

void put(OutputArchive& ar, const std::string& key, const torch::nn::Module& m) {
  OutputArchive sub;
  m.save(sub);
  ar.write(key, sub);
}

void get(InputArchive& ar, const std::string& key, torch::nn::Module& m) {
  InputArchive sub;
  ar.read(key, sub);
  m.load(sub);
}

int64_t read_int(InputArchive& ar, const std::string& key) {
  c10::IValue v;
  ar.read(key, v);
  return v.toInt();
}

std::string read_string(InputArchive& ar, const std::string& key) {
  c10::IValue v;
  ar.read(key, v);
  return v.toStringRef();
}

InputArchive open_archive(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("checkpoint " + path.string() + " does not exist");
  InputArchive ar;
  try {
    ar.load_from(path.string());
  } catch (const c10::Error& e) {
    throw Error("checkpoint " + path.string() + " is unreadable: " + e.what_without_backtrace());
  }
  return ar;
}

CheckpointInfo read_info(InputArchive& ar, const std::filesystem::path& path) {
  CheckpointInfo info;
  try {
    if (read_string(ar, "format") != kFormat) throw Error("not a motionxfer checkpoint");
    info.version = static_cast<int>(read_int(ar, "version"));
    if (info.version != kCheckpointVersion) {
      throw Error("unsupported checkpoint version " + std::to_string(info.version));
    }
    info.config = train_config_from_json(nlohmann::json::parse(read_string(ar, "config")));
    info.stage = static_cast<int>(read_int(ar, "stage"));
    info.step = static_cast<int>(read_int(ar, "step"));
    info.aux_ready = read_int(ar, "aux_ready") != 0;
  } catch (const c10::Error& e) {
    throw Error("checkpoint " + path.string() + ": " + e.what_without_backtrace());
  } catch (const std::exception& e) {
    throw Error("checkpoint " + path.string() + ": " + e.what());
  }
  if (info.stage < 0 || info.stage >= static_cast<int>(info.config.resolutions.size())) {
    throw Error("checkpoint " + path.string() + ": stage out of range");
  }
  return info;
}

std::string first_difference(const nlohmann::json& a, const nlohmann::json& b) {
  const auto patch = nlohmann::json::diff(a, b);
  if (patch.empty()) return {};
  return patch.front().value("path", std::string("?"));
}

}  // namespace

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  auto ar = open_archive(path);
  return read_info(ar, path);
}

InferenceModels load_inference_models(const std::filesystem::path& path) {
  auto ar = open_archive(path);
  InferenceModels m;
  m.info = read_info(ar, path);
  const auto& cfg = m.info.config;
  GeneratorSpec gs = cfg.generator;
  gs.fine = false;
  gs.in_channels = kPartsChannels + kPoseChannels * cfg.history;
  m.synthesis = Generator(gs);
  gs.in_channels = 3 + kPoseChannels * cfg.history;
  m.fusion = Generator(gs);
  if (m.info.stage > 0) {
    m.synthesis->enable_fine(cfg.generator.n_fine_residual);
    m.fusion->enable_fine(cfg.generator.n_fine_residual);
  }
  try {
    get(ar, "synthesis", *m.synthesis);
    get(ar, "fusion", *m.fusion);
  } catch (const c10::Error& e) {
    throw Error("checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  m.synthesis->eval();
  m.fusion->eval();
  return m;
}

void Trainer::save(const std::filesystem::path& path) const {
  OutputArchive ar;
  ar.write("format", c10::IValue(std::string(kFormat)));
  ar.write("version", c10::IValue(static_cast<int64_t>(kCheckpointVersion)));
  ar.write("config", c10::IValue(to_json(cfg_).dump()));
  ar.write("stage", c10::IValue(static_cast<int64_t>(stage_index_)));
  ar.write("step", c10::IValue(static_cast<int64_t>(step_)));
  ar.write("aux_ready", c10::IValue(static_cast<int64_t>(aux_ready_ ? 1 : 0)));
  put(ar, "synthesis", *models_.synthesis);
  put(ar, "fusion", *models_.fusion);
  put(ar, "disc_synthesis", *models_.disc_synthesis);
  put(ar, "disc_fusion", *models_.disc_fusion);
  put(ar, "aux_pose", *models_.aux_pose);
  put(ar, "aux_parse", *models_.aux_parse);
  {
    OutputArchive sub;
    opt_g_->save(sub);
    ar.write("opt_g", sub);
  }
  {
    OutputArchive sub;
    opt_d_->save(sub);
    ar.write("opt_d", sub);
  }
  ar.write("torch_rng", at::detail::getDefaultCPUGenerator().get_state());
  std::ostringstream rng;
  rng << rng_;
  ar.write("std_rng", c10::IValue(rng.str()));
  const auto tmp = path.string() + ".tmp";
  ar.save_to(tmp);
  std::filesystem::rename(tmp, path);
}

void Trainer::load(const std::filesystem::path& path) {
  auto ar = open_archive(path);
  const CheckpointInfo info = read_info(ar, path);
  const auto mine = to_json(cfg_);
  const auto theirs = to_json(info.config);
  if (mine != theirs) {
    throw Error("checkpoint " + path.string() + ": config mismatch at " + first_difference(mine, theirs));
  }
  for (int s = stage_index_ + 1; s <= info.stage; ++s) enter_stage(s);
  try {
    get(ar, "synthesis", *models_.synthesis);
    get(ar, "fusion", *models_.fusion);
    get(ar, "disc_synthesis", *models_.disc_synthesis);
    get(ar, "disc_fusion", *models_.disc_fusion);
    get(ar, "aux_pose", *models_.aux_pose);
    get(ar, "aux_parse", *models_.aux_parse);
    InputArchive og, od;
    ar.read("opt_g", og);
    opt_g_->load(og);
    ar.read("opt_d", od);
    opt_d_->load(od);
    torch::Tensor state;
    ar.read("torch_rng", state);
    auto gen = at::detail::getDefaultCPUGenerator();
    gen.set_state(state);
    std::istringstream rng(read_string(ar, "std_rng"));
    rng >> rng_;
  } catch (const c10::Error& e) {
    throw Error("checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  step_ = info.step;
  aux_ready_ = info.aux_ready;
  if (aux_ready_) {
    for (auto* m : {&*models_.aux_pose, &*models_.aux_parse}) {
      for (auto& p : m->parameters()) p.set_requires_grad(false);
      m->eval();
    }
  }
}

}  // namespace mxf
