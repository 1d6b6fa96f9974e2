#pragma once

// FCWT tensor container, little-endian throughout:
//
//   "FCWT"                      4-byte magic
//   u16 version                 = 1
//   u16 tensor_count
//   per tensor:
//     u16 name_length, UTF-8 name
//     u8  dtype                 0 = float32
//     u8  rank
//     u32 dims[rank]
//     payload                   row-major, prod(dims) elements
//   u32 header_length, UTF-8 header   (a JSON document)
//
// Nothing may follow the header.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fcppn/tensor.hpp"

namespace fcppn {

inline constexpr std::uint16_t kContainerVersion = 1;

struct ContainerTensor {
  std::string name;
  Tensor<float> value;
};

struct Container {
  std::vector<ContainerTensor> tensors;
  std::string header;

  // nullptr when absent.
  const ContainerTensor* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_container(const Container& container);
// Throws ParseError with the failing byte offset.
Container decode_container(std::span<const std::uint8_t> bytes);

void write_container(const std::filesystem::path& path,
                     const Container& container);
Container read_container(const std::filesystem::path& path);

}  // namespace fcppn
