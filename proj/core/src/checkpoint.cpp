#include "specvit/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "specvit/config.hpp"
#include "specvit/errors.hpp"

namespace specvit {

void write_checkpoint(std::ostream& out, const VitModel& model) {
  const auto& c = model.config;
  out << "specvit-checkpoint " << kCheckpointVersion << '\n';
  out << "config image_size=" << c.image_size << " patch_size=" << c.patch_size
      << " embed_dim=" << c.embed_dim << " num_layers=" << c.num_layers << " num_heads=" << c.num_heads
      << " mlp_dim=" << c.mlp_dim << " num_classes=" << c.num_classes
      << " ln_eps=" << format_double(c.ln_eps) << '\n';
  for (const auto& t : tensor_views(model.params)) {
    out << "tensor " << t.name << ' ' << t.rows << ' ' << t.cols << '\n';
    const auto vals = t.values();
    for (std::size_t i = 0; i < vals.size(); ++i)
      out << format_double(vals[i]) << (i + 1 == vals.size() ? '\n' : ' ');
  }
}

VitModel read_checkpoint(std::istream& in, const std::string& source) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "specvit-checkpoint")
    throw ValidationError(source + ": not a specvit checkpoint");
  if (version != kCheckpointVersion)
    throw ValidationError(source + ": unsupported checkpoint version " + std::to_string(version));

  std::string word;
  if (!(in >> word) || word != "config") throw ValidationError(source + ": missing config line");
  std::string line;
  std::getline(in, line);
  KeyValueConfig kv;
  std::istringstream ls(line);
  while (ls >> word) kv.set_assignment(word);

  VitConfig cfg;
  cfg.image_size = static_cast<std::size_t>(kv.get_int("image_size", 0));
  cfg.patch_size = static_cast<std::size_t>(kv.get_int("patch_size", 0));
  cfg.embed_dim = static_cast<std::size_t>(kv.get_int("embed_dim", 0));
  cfg.num_layers = static_cast<std::size_t>(kv.get_int("num_layers", 0));
  cfg.num_heads = static_cast<std::size_t>(kv.get_int("num_heads", 0));
  cfg.mlp_dim = static_cast<std::size_t>(kv.get_int("mlp_dim", 0));
  cfg.num_classes = static_cast<std::size_t>(kv.get_int("num_classes", 0));
  cfg.ln_eps = kv.get_double("ln_eps", cfg.ln_eps);
  cfg.validate();

  VitModel model{cfg, zero_params(cfg)};
  for (const auto& t : tensor_views(model.params)) {
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> word >> name >> rows >> cols) || word != "tensor")
      throw ValidationError(source + ": expected tensor header for " + t.name);
    if (name != t.name) throw ValidationError(source + ": expected tensor " + t.name + ", found " + name);
    if (rows != t.rows || cols != t.cols)
      throw ValidationError(source + ": tensor " + name + " has shape " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", config implies " + std::to_string(t.rows) + "x" +
                            std::to_string(t.cols));
    for (double& v : t.values()) {
      if (!(in >> word)) throw ValidationError(source + ": truncated tensor " + name);
      v = parse_double(word);
    }
  }
  if (in >> word) throw ValidationError(source + ": trailing data after last tensor");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const VitModel& model) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write checkpoint " + path.string());
  write_checkpoint(out, model);
}

VitModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  return read_checkpoint(in, path.string());
}

}  // namespace specvit
