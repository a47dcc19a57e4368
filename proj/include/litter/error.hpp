#pragma once

#include <stdexcept>
#include <string>

namespace litter {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TaxonomyError : public Error {
 public:
  using Error::Error;
};

class TilingError : public Error {
 public:
  using Error::Error;
};

/// Raised for detector failures; carries the tile that failed.
class DetectorError : public Error {
 public:
  DetectorError(int tile_id, const std::string& what)
      : Error("tile " + std::to_string(tile_id) + ": " + what), tile_id_(tile_id) {}
  int tile_id() const noexcept { return tile_id_; }

 private:
  int tile_id_;
};

/// Annotation/detection file problems. `line` is 1-based, 0 when unknown.
class FormatError : public Error {
 public:
  FormatError(std::size_t line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class GeoError : public Error {
 public:
  using Error::Error;
};

}  // namespace litter
