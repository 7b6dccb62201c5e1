/* helloworld+00.c : generated by meltlite from helloworld */
#include "meltlite_runtime.h"
#include "meltlite_hostir.h"

/* module value roots (0 used) */
meltlite_value_t meltlite_modvals_helloworld[1];

/* routine declarations */
meltlite_value_t meltlite_start_helloworld (meltlite_ctx_t *, meltlite_value_t);

meltlite_value_t
meltlite_start_helloworld (meltlite_ctx_t *mlctx_, meltlite_value_t parentenv_)
{
 meltlite_value_t retval_ = NULL;
 struct {
  int mcfr_nbvar;
  const char *mcfr_flocs;
  meltlite_value_t mcfr_clos;
  struct meltlite_callframe_st *mcfr_prev;
  meltlite_value_t mcfr_varptr[2]; /* 0:parentenv 1:curenv */
 } meltfram__;
 memset ((void *) &meltfram__, 0, sizeof (meltfram__));
 meltfram__.mcfr_nbvar = (2);
 meltfram__.mcfr_flocs = "helloworld.melt:2";
 meltfram__.mcfr_prev = meltlite_topframe;
 meltlite_topframe = (struct meltlite_callframe_st *) &meltfram__;
 meltlite_register_module_roots (mlctx_, meltlite_modvals_helloworld, 1);
 meltfram__.mcfr_varptr[0] = parentenv_;
 meltfram__.mcfr_varptr[1] = meltlite_new_env (meltfram__.mcfr_varptr[0]);
#ifdef MELTLITE_WITH_LINE
#line 2 "helloworld.melt"
#endif /*MELTLITE_WITH_LINE*/
 int i=0; /* our HELLOWORLDCHUNK__1 */ 
             HELLOWORLDCHUNK__1_label: printf("hello world from MELT\n");
             if (i++ < 3) goto HELLOWORLDCHUNK__1_label; ;
 retval_ = meltfram__.mcfr_varptr[1];
 goto labend_;
labend_:;
 meltlite_topframe = (struct meltlite_callframe_st *) meltfram__.mcfr_prev;
 return retval_;
}

