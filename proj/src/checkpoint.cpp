#include "kdseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "kdseg/errors.hpp"

namespace kdseg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'K', 'D', 'S', 'E', 'G', 'C', 'K', 'P'};

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("truncated checkpoint");
  return v;
}

json spec_to_json(const UNetSpec& s) {
  return {{"depth", s.depth},
          {"base_channels", s.base_channels},
          {"in_channels", s.in_channels},
          {"out_channels", s.out_channels},
          {"dropout_rates", s.dropout_rates},
          {"allow_high_dropout", s.allow_high_dropout}};
}

UNetSpec spec_from_json(const json& j) {
  UNetSpec s;
  s.depth = j.at("depth").get<int>();
  s.base_channels = j.at("base_channels").get<int>();
  s.in_channels = j.at("in_channels").get<int>();
  s.out_channels = j.at("out_channels").get<int>();
  s.dropout_rates = j.at("dropout_rates").get<std::vector<double>>();
  s.allow_high_dropout = j.at("allow_high_dropout").get<bool>();
  return s;
}

}  // namespace

Checkpoint capture(const StudentModel& model, const RmsProp* optimizer, int epoch) {
  Checkpoint ckpt;
  ckpt.spec = model.spec();
  ckpt.epoch = epoch;
  for (const auto* p : model.parameters()) ckpt.parameters.push_back({p->name, p->shape, {p->value.begin(), p->value.end()}});
  if (optimizer != nullptr) {
    ckpt.optimizer = optimizer->config();
    ckpt.optimizer_steps = optimizer->steps();
    for (const auto& slot : optimizer->slots()) {
      ckpt.optimizer_state.push_back({slot.name, {static_cast<int>(slot.mean_square.size())}, slot.mean_square});
    }
  }
  return ckpt;
}

void restore(StudentModel& model, const Checkpoint& ckpt) {
  if (!(model.spec() == ckpt.spec)) throw FormatError("checkpoint spec does not match the model");
  auto params = model.parameters();
  if (params.size() != ckpt.parameters.size()) throw FormatError("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& src = ckpt.parameters[i];
    if (src.name != params[i]->name || src.shape != params[i]->shape || src.data.size() != params[i]->value.size()) {
      throw FormatError("checkpoint parameter " + src.name + " does not match model parameter " + params[i]->name);
    }
    params[i]->value.assign(src.data.begin(), src.data.end());
  }
}

RmsProp restore_optimizer(const Checkpoint& ckpt) {
  RmsProp opt(ckpt.optimizer);
  std::vector<RmsProp::Slot> slots;
  for (const auto& a : ckpt.optimizer_state) slots.push_back({a.name, a.data});
  opt.restore(std::move(slots), ckpt.optimizer_steps);
  return opt;
}

StudentModel model_from(const Checkpoint& ckpt) {
  StudentModel model(ckpt.spec, 0);
  restore(model, ckpt);
  return model;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  json header;
  header["spec"] = spec_to_json(ckpt.spec);
  header["epoch"] = ckpt.epoch;
  header["optimizer_steps"] = ckpt.optimizer_steps;
  header["optimizer"] = {{"learning_rate", ckpt.optimizer.learning_rate},
                         {"rho", ckpt.optimizer.rho},
                         {"epsilon", ckpt.optimizer.epsilon},
                         {"decay", ckpt.optimizer.decay}};
  header["arrays"] = json::array();
  std::size_t offset = 0;
  auto describe = [&](const std::vector<NamedArray>& arrays, const char* section) {
    for (const auto& a : arrays) {
      header["arrays"].push_back(
          {{"name", a.name}, {"shape", a.shape}, {"section", section}, {"offset", offset}, {"count", a.data.size()}});
      offset += a.data.size();
    }
  };
  describe(ckpt.parameters, "parameters");
  describe(ckpt.optimizer_state, "optimizer");
  const std::string text = header.dump();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, Checkpoint::kVersion);
  write_pod<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto* arrays : {&ckpt.parameters, &ckpt.optimizer_state}) {
    for (const auto& a : *arrays) {
      out.write(reinterpret_cast<const char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * sizeof(float)));
    }
  }
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw FormatError("not a kdseg checkpoint: " + path.string());
  const auto version = read_pod<std::uint32_t>(in);
  if (version != Checkpoint::kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  const auto header_len = read_pod<std::uint64_t>(in);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw FormatError("truncated checkpoint header");

  Checkpoint ckpt;
  try {
    const json header = json::parse(text);
    ckpt.spec = spec_from_json(header.at("spec"));
    ckpt.epoch = header.at("epoch").get<int>();
    ckpt.optimizer_steps = header.at("optimizer_steps").get<std::size_t>();
    const auto& o = header.at("optimizer");
    ckpt.optimizer = {o.at("learning_rate").get<double>(), o.at("rho").get<double>(), o.at("epsilon").get<double>(),
                      o.at("decay").get<double>()};
    for (const auto& a : header.at("arrays")) {
      NamedArray arr{a.at("name").get<std::string>(), a.at("shape").get<std::vector<int>>(),
                     std::vector<float>(a.at("count").get<std::size_t>())};
      in.read(reinterpret_cast<char*>(arr.data.data()), static_cast<std::streamsize>(arr.data.size() * sizeof(float)));
      if (!in) throw FormatError("truncated checkpoint payload");
      if (a.at("section").get<std::string>() == "parameters") {
        ckpt.parameters.push_back(std::move(arr));
      } else {
        ckpt.optimizer_state.push_back(std::move(arr));
      }
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed checkpoint header in " + path.string() + ": " + e.what());
  }
  return ckpt;
}

}  // namespace kdseg
