#include "radnas/nas/gene_io.hpp"

#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "radnas/util/hash.hpp"

namespace radnas::nas {

std::string format_gene(const SearchSpace& space, const ArchitectureGene& gene) {
  validate_gene(space, gene);
  std::ostringstream os;
  os << "space " << space.hash() << "\n";
  for (std::size_t i = 0; i < space.blocks.size(); ++i) {
    os << space.blocks[i].id << " " << gene.choices[i] << "\n";
  }
  return os.str();
}

ArchitectureGene parse_gene(const SearchSpace& space, const std::string& text) {
  std::istringstream is(text);
  std::string key, value;
  if (!(is >> key >> value) || key != "space") {
    throw std::invalid_argument("gene file: missing space hash line");
  }
  if (value != space.hash()) {
    throw std::invalid_argument("gene file: space hash " + value +
                                " does not match configured space " + space.hash());
  }
  std::map<std::string, int> seen;
  std::string id;
  int index = 0;
  while (is >> id >> index) {
    if (!seen.emplace(id, index).second) {
      throw std::invalid_argument("gene file: block " + id + " listed twice");
    }
  }
  if (!is.eof()) throw std::invalid_argument("gene file: malformed entry after " + id);
  ArchitectureGene gene;
  for (const auto& b : space.blocks) {
    auto it = seen.find(b.id);
    if (it == seen.end()) throw std::invalid_argument("gene file: block " + b.id + " missing");
    gene.choices.push_back(it->second);
    seen.erase(it);
  }
  if (!seen.empty()) {
    throw std::invalid_argument("gene file: unknown block " + seen.begin()->first);
  }
  validate_gene(space, gene);
  return gene;
}

void write_gene_file(const std::filesystem::path& path, const SearchSpace& space,
                     const ArchitectureGene& gene) {
  util::write_file_atomic(path, format_gene(space, gene));
}

ArchitectureGene read_gene_file(const std::filesystem::path& path,
                                const SearchSpace& space) {
  return parse_gene(space, util::read_file(path));
}

void write_search_log(const std::filesystem::path& path,
                      const std::vector<SearchLogRow>& rows) {
  std::string out = "iteration,gene_id,fitness,params,flops\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%lld,%lld\n", r.iteration, r.gene_id.c_str(),
                  r.fitness, static_cast<long long>(r.params), static_cast<long long>(r.flops));
    out += buf;
  }
  util::write_file_atomic(path, out);
}

}  // namespace radnas::nas
