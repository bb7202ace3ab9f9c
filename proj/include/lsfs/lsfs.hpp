#pragma once

#include "lsfs/errors.hpp"
#include "lsfs/skip_plan.hpp"
#include "lsfs/net_model.hpp"
#include "lsfs/pls.hpp"
#include "lsfs/hw_model.hpp"
#include "lsfs/profiles.hpp"
#include "lsfs/optimizer.hpp"
