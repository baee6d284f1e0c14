#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fdc/nn/network.hpp"

// "FDCW" weight archive, little-endian:
//   magic "FDCW", version u32, tensor count u32
//   per tensor: u16 name length, name bytes, rank u8, dims u32[rank], dtype u8, offset u64
//   data section: contiguous tensor payloads at the recorded absolute offsets
// dtype 1 = f32, 2 = u8. The u8 tensor "__spec__" carries the network spec
// as JSON so a pruned model reloads with its own architecture.
namespace fdc::nn {

inline constexpr std::uint32_t kArchiveVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;
inline constexpr std::uint8_t kDtypeU8 = 2;
inline constexpr std::string_view kSpecTensor = "__spec__";

struct ArchiveTensor {
    std::string name;
    Shape dims;
    std::uint8_t dtype = kDtypeF32;
    std::vector<float> f32;
    std::vector<std::uint8_t> u8;
};

std::vector<std::uint8_t> encode_archive(std::span<const ArchiveTensor> tensors);
// Validates the whole container before returning anything.
std::vector<ArchiveTensor> decode_archive(std::span<const std::uint8_t> bytes);

// Parameter tensor names: conv{k}.weight / conv{k}.bias and fc{k}.weight /
// fc{k}.bias, k counting conv and dense layers separately from 1.
std::vector<std::string> parameter_names(const NetworkSpec& spec);

std::vector<std::uint8_t> serialize_weights(const Network& net);
Network deserialize_weights(std::span<const std::uint8_t> bytes);
void save_weights(const Network& net, const std::string& path);
Network load_weights(const std::string& path);

// Fills `spec` from an archive whose parameter tensors chain onto it, in
// order. A 3-channel first conv is reduced to 1 channel by averaging over
// the input channels. Shape mismatches name the offending tensor.
Network load_weights_into(const NetworkSpec& spec, std::span<const std::uint8_t> bytes);
Network load_weights_into(const NetworkSpec& spec, const std::string& path);

}  // namespace fdc::nn
