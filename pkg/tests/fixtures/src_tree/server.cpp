#include <spdlog/spdlog.h>

void serve(int peer, const char* dev, long id, int ms) {
    spdlog::info("Server accepted connection from {}", peer);
    SPDLOG_CRITICAL("Disk quota exceeded on {}", dev);
    LOG(INFO) << "Replication finished for block " << id << " in " << ms << " ms";
    LOG(WARNING) << "slow disk";
    int x = compute(peer);
}
