#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace cdfsl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNumericError = 3;

struct CommandOptions {
    std::filesystem::path config_path;
    std::filesystem::path out_dir;
    std::optional<std::uint64_t> seed_override;
    bool force = false;
    bool rho_off = false;
    int parallel = 1;
};

int cmd_pretrain(const CommandOptions& opts);
int cmd_metatrain(const CommandOptions& opts, const std::filesystem::path& checkpoint);
int cmd_evaluate(const CommandOptions& opts, const std::filesystem::path& checkpoint);
int cmd_ablate(const CommandOptions& opts);
int cmd_sweep(const CommandOptions& opts);
int cmd_selftest();

}  // namespace cdfsl
