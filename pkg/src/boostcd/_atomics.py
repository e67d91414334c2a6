"""Lock-free primitives for numba kernels (LLVM atomicrmw / cmpxchg)."""

from numba import types
from numba.core import cgutils
from numba.extending import intrinsic


@intrinsic
def atomic_add(typingctx, arr, idx, val):
    """arr[idx] += val atomically; returns the previous value."""
    if not isinstance(arr, types.Array) or arr.dtype != types.float64:
        return None
    sig = types.float64(arr, idx, types.float64)

    def codegen(context, builder, signature, args):
        arrty = signature.args[0]
        a, i, v = args
        ary = context.make_array(arrty)(context, builder, a)
        ptr = cgutils.get_item_pointer(context, builder, arrty, ary, [i])
        return builder.atomic_rmw("fadd", ptr, v, "monotonic")

    return sig, codegen


@intrinsic
def compare_and_swap(typingctx, arr, idx, expected, new):
    """If arr[idx] == expected set it to new; returns True on success (int64 arrays)."""
    if not isinstance(arr, types.Array) or arr.dtype != types.int64:
        return None
    sig = types.boolean(arr, idx, types.int64, types.int64)

    def codegen(context, builder, signature, args):
        arrty = signature.args[0]
        a, i, o, n = args
        ary = context.make_array(arrty)(context, builder, a)
        ptr = cgutils.get_item_pointer(context, builder, arrty, ary, [i])
        res = builder.cmpxchg(ptr, o, n, "acq_rel", "monotonic")
        return builder.extract_value(res, 1)

    return sig, codegen


@intrinsic
def atomic_store(typingctx, arr, idx, val):
    """Release-store into an int64 array slot."""
    if not isinstance(arr, types.Array) or arr.dtype != types.int64:
        return None
    sig = types.int64(arr, idx, types.int64)

    def codegen(context, builder, signature, args):
        arrty = signature.args[0]
        a, i, v = args
        ary = context.make_array(arrty)(context, builder, a)
        ptr = cgutils.get_item_pointer(context, builder, arrty, ary, [i])
        return builder.atomic_rmw("xchg", ptr, v, "release")

    return sig, codegen
