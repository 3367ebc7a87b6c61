#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "phshape/controller.hpp"
#include "phshape/systems.hpp"

namespace phshape {

/// A ShapedController on disk: a directory holding package.json (plant,
/// choices and synthesis metadata), added_mass.csv, potential.csv and
/// gamma.csv. Tables are written with 17 significant digits, so loading
/// reproduces the controller bit for bit.
struct ControllerPackage {
  std::string system;
  systems::Params params;
  std::shared_ptr<const ShapedController> controller;
};

void save_package(const std::filesystem::path& dir, const ControllerPackage& pkg);

/// Throws PackageError for missing, unreadable or inconsistent files.
ControllerPackage load_package(const std::filesystem::path& dir);

/// A numeric CSV with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; throws PackageError when absent.
  std::size_t column(const std::string& name) const;
};

/// Throws PackageError for unreadable files, ragged rows or non-numeric cells.
CsvTable read_csv(const std::filesystem::path& file);

/// Column names of added_mass.csv: q_i, m_a11, the unknown channels, their
/// derivatives, then s1, s2, s3 (scalar case only) and lambda_min.
std::vector<std::string> added_mass_columns(const AddedMassTable& table);

}  // namespace phshape
