#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "radnas/nas/evolution.hpp"
#include "radnas/nas/search_space.hpp"

namespace radnas::nas {

// Text form: "space <hash>" then one "<block_id> <option_index>" per line.
std::string format_gene(const SearchSpace& space, const ArchitectureGene& gene);
// Verifies the space hash and that every block appears exactly once.
ArchitectureGene parse_gene(const SearchSpace& space, const std::string& text);

void write_gene_file(const std::filesystem::path& path, const SearchSpace& space,
                     const ArchitectureGene& gene);
ArchitectureGene read_gene_file(const std::filesystem::path& path,
                                const SearchSpace& space);

// CSV header iteration,gene_id,fitness,params,flops.
void write_search_log(const std::filesystem::path& path,
                      const std::vector<SearchLogRow>& rows);

}  // namespace radnas::nas
