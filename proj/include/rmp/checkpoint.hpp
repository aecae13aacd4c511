#ifndef RMP_CHECKPOINT_HPP_
#define RMP_CHECKPOINT_HPP_

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rmp/tensor.hpp"

namespace rmp {

// Binary tensor container: 8-byte magic "BCKPT001", a little-endian uint64
// header length, the UTF-8 JSON header, then raw little-endian float32 data.
// The header lists tensors as {name, shape, offset} (offsets relative to the
// start of the data section) and carries caller metadata under "meta".

using NamedTensorList = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const std::string& path, const NamedTensorList& tensors,
                     const nlohmann::json& meta);

NamedTensorList load_checkpoint(const std::string& path, nlohmann::json* meta_out = nullptr);

// Round a value (or a whole tensor) to 32-bit storage precision. Parameters
// are kept storage-exact at all times so a save/load cycle never changes
// model behavior.
inline scalar storage_round(scalar v) { return static_cast<scalar>(static_cast<float>(v)); }
void storage_round_tensor(Tensor& t);

}  // namespace rmp

#endif  // RMP_CHECKPOINT_HPP_
